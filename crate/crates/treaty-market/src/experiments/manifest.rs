//! Run manifest: a self-describing JSON record written once at run end.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
    pub outputs: Vec<PathBuf>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunSummary {
    pub episodes: u64,
    pub updates: u64,
    /// Mean reward per agent-episode over the final evaluation snapshot.
    pub final_eval_mean_reward: f64,
    pub final_eval_mean_profit: f64,
    /// Mean reward per agent-episode over the whole training stream.
    pub training_mean_reward: f64,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Contract(format!("manifest parse: {e}")))
    }

    /// Every referenced output exists and is non-empty.
    pub fn verify_outputs(&self) -> Result<()> {
        for p in &self.outputs {
            let meta = std::fs::metadata(p)
                .map_err(|e| Error::io(p.display().to_string(), e))?;
            if meta.len() == 0 {
                return Err(Error::Contract(format!("manifest output {} is empty", p.display())));
            }
        }
        Ok(())
    }
}
