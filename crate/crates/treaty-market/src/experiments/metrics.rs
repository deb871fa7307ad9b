//! Episode metrics: the fixed-schema CSV that every run emits, one row per
//! (episode, agent).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::AgentEpisodeRecord;

pub const METRICS_HEADER: &str =
    "episode,agent_id,reward,profit,cvar95,efficiency,win,premium_rate,loss_total,loss_ratio,capital";

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub agent_id: usize,
    pub reward: f64,
    pub profit: f64,
    pub cvar95: f64,
    pub efficiency: f64,
    pub win: bool,
    pub premium_rate: f64,
    /// Claims incurred by this agent this episode (zero unless it won).
    pub loss_total: f64,
    /// Cumulative claims over cumulative premium; zero before any premium.
    pub loss_ratio: f64,
    pub capital: f64,
}

impl EpisodeMetrics {
    pub fn from_record(episode: u64, r: &AgentEpisodeRecord) -> Self {
        EpisodeMetrics {
            episode,
            agent_id: r.agent_id,
            reward: r.reward,
            profit: r.profit,
            cvar95: r.cvar_estimate,
            efficiency: r.efficiency,
            win: r.win,
            premium_rate: r.premium_rate,
            loss_total: r.claims,
            loss_ratio: r.loss_ratio,
            capital: r.capital_after,
        }
    }
}

/// 17 significant digits: enough for bit-exact f64 round trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Contract(format!("unparseable float field '{s}'")))
}

pub fn format_row(m: &EpisodeMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        m.episode,
        m.agent_id,
        fmt_f64(m.reward),
        fmt_f64(m.profit),
        fmt_f64(m.cvar95),
        fmt_f64(m.efficiency),
        u8::from(m.win),
        fmt_f64(m.premium_rate),
        fmt_f64(m.loss_total),
        fmt_f64(m.loss_ratio),
        fmt_f64(m.capital),
    )
}

pub fn parse_row(line: &str) -> Result<EpisodeMetrics> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 11 {
        return Err(Error::Contract(format!(
            "metrics row has {} fields, expected 11: '{line}'",
            fields.len()
        )));
    }
    Ok(EpisodeMetrics {
        episode: fields[0]
            .parse()
            .map_err(|_| Error::Contract(format!("bad episode field '{}'", fields[0])))?,
        agent_id: fields[1]
            .parse()
            .map_err(|_| Error::Contract(format!("bad agent field '{}'", fields[1])))?,
        reward: parse_f64(fields[2])?,
        profit: parse_f64(fields[3])?,
        cvar95: parse_f64(fields[4])?,
        efficiency: parse_f64(fields[5])?,
        win: fields[6] == "1",
        premium_rate: parse_f64(fields[7])?,
        loss_total: parse_f64(fields[8])?,
        loss_ratio: parse_f64(fields[9])?,
        capital: parse_f64(fields[10])?,
    })
}

/// Serialize a metrics stream to CSV text (header plus one row per record).
pub fn to_csv(records: &[EpisodeMetrics]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    out
}

pub fn write_csv(records: &[EpisodeMetrics], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(to_csv(records).as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_csv(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Vec<EpisodeMetrics>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => {
            return Err(Error::Contract(format!("bad metrics header: {other:?}")));
        }
    }
    lines.map(parse_row).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(e: u64, a: usize, x: f64) -> EpisodeMetrics {
        EpisodeMetrics {
            episode: e,
            agent_id: a,
            reward: x,
            profit: -x * 0.3,
            cvar95: x.abs(),
            efficiency: 0.5,
            win: e.is_multiple_of(2),
            premium_rate: 0.0512,
            loss_total: x * x,
            loss_ratio: 0.77,
            capital: 1.5 + x,
        }
    }

    #[test]
    fn empty_stream_is_header_only() {
        assert_eq!(to_csv(&[]), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn round_trip_is_exact() {
        let rows: Vec<EpisodeMetrics> = (0..50)
            .map(|i| sample_row(i, (i % 3) as usize, (i as f64 * 0.7312).sin() * 1e-3 + 1.0 / 3.0))
            .collect();
        let text = to_csv(&rows);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), rows.len());
        for (a, b) in rows.iter().zip(parsed.iter()) {
            assert_eq!(a.reward.to_bits(), b.reward.to_bits());
            assert_eq!(a.profit.to_bits(), b.profit.to_bits());
            assert_eq!(a.capital.to_bits(), b.capital.to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn seventeen_significant_digits_round_trip_edge_values() {
        for v in [
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            1e300,
            -0.0,
            123_456_789.123_456_78,
            2.0f64.powi(-40) + 1.0,
        ] {
            let parsed: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "value {v}");
        }
    }

    #[test]
    fn column_count_is_constant() {
        let rows: Vec<EpisodeMetrics> = (0..20).map(|i| sample_row(i, 0, i as f64)).collect();
        let text = to_csv(&rows);
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 11);
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(parse_row("1,2,3").is_err());
        assert!(parse_csv("wrong,header\n").is_err());
    }
}
