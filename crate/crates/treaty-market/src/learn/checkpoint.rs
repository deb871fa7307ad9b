//! Versioned binary checkpoint container.
//!
//! Layout: magic bytes, format version, then named sections. A section is a
//! network snapshot (layer sizes plus row-major 64-bit little-endian weights
//! and biases, with optional Adam moments and step count), a raw f64 vector,
//! or a raw u64 vector (counters and rng derivation keys). Round trips are
//! bit-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::adam::AdamState;
use crate::learn::codec::{Reader, Writer};
use crate::learn::net::DenseNet;

const MAGIC: &[u8; 4] = b"TMCK";
const VERSION: u32 = 1;

const KIND_NETWORK: u8 = 0;
const KIND_F64: u8 = 1;
const KIND_U64: u8 = 2;
const KIND_BYTES: u8 = 3;

/// A network plus its optimizer state, detached from any live trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub layer_sizes: Vec<usize>,
    pub flat_params: Vec<f64>,
    pub adam: Option<AdamState>,
}

impl NetworkSnapshot {
    pub fn of(net: &DenseNet, adam: Option<&AdamState>) -> Self {
        NetworkSnapshot {
            layer_sizes: net.layer_sizes().to_vec(),
            flat_params: net.flat_params(),
            adam: adam.cloned(),
        }
    }

    pub fn restore(&self) -> Result<(DenseNet, Option<AdamState>)> {
        let mut net = DenseNet::zeros(&self.layer_sizes)?;
        net.set_flat_params(&self.flat_params)?;
        Ok((net, self.adam.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Network(NetworkSnapshot),
    F64(Vec<f64>),
    U64(Vec<u64>),
    Bytes(Vec<u8>),
}

/// Named-section container with a free-form manifest header (agent ids,
/// roles, algorithm tags).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub manifest: Vec<(String, String)>,
    sections: Vec<(String, Section)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn tag(&mut self, key: &str, value: impl Into<String>) {
        self.manifest.push((key.to_string(), value.into()));
    }

    pub fn manifest_value(&self, key: &str) -> Option<&str> {
        self.manifest.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn put(&mut self, name: &str, section: Section) {
        self.sections.push((name.to_string(), section));
    }

    pub fn put_network(&mut self, name: &str, net: &DenseNet, adam: Option<&AdamState>) {
        self.put(name, Section::Network(NetworkSnapshot::of(net, adam)));
    }

    pub fn put_f64(&mut self, name: &str, values: Vec<f64>) {
        self.put(name, Section::F64(values));
    }

    pub fn put_u64(&mut self, name: &str, values: Vec<u64>) {
        self.put(name, Section::U64(values));
    }

    pub fn put_bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.put(name, Section::Bytes(bytes));
    }

    pub fn get(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Checkpoint(format!("missing section '{name}'")))
    }

    pub fn get_network(&self, name: &str) -> Result<&NetworkSnapshot> {
        match self.get(name)? {
            Section::Network(n) => Ok(n),
            _ => Err(Error::Checkpoint(format!("section '{name}' is not a network"))),
        }
    }

    pub fn get_f64(&self, name: &str) -> Result<&[f64]> {
        match self.get(name)? {
            Section::F64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("section '{name}' is not an f64 vector"))),
        }
    }

    pub fn get_u64(&self, name: &str) -> Result<&[u64]> {
        match self.get(name)? {
            Section::U64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("section '{name}' is not a u64 vector"))),
        }
    }

    pub fn get_bytes(&self, name: &str) -> Result<&[u8]> {
        match self.get(name)? {
            Section::Bytes(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("section '{name}' is not a byte blob"))),
        }
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(MAGIC);
        w.put_u32(VERSION);
        w.put_u32(self.manifest.len() as u32);
        for (k, v) in &self.manifest {
            w.put_str(k);
            w.put_str(v);
        }
        w.put_u32(self.sections.len() as u32);
        for (name, section) in &self.sections {
            w.put_str(name);
            match section {
                Section::Network(n) => {
                    w.put_u8(KIND_NETWORK);
                    w.put_u64_slice(
                        &n.layer_sizes.iter().map(|&s| s as u64).collect::<Vec<_>>(),
                    );
                    w.put_f64_slice(&n.flat_params);
                    match &n.adam {
                        None => w.put_u8(0),
                        Some(a) => {
                            w.put_u8(1);
                            w.put_u64(a.step_count);
                            w.put_f64(a.learning_rate);
                            w.put_f64(a.beta1);
                            w.put_f64(a.beta2);
                            w.put_f64(a.epsilon_adam);
                            w.put_f64_slice(&a.first_moment);
                            w.put_f64_slice(&a.second_moment);
                        }
                    }
                }
                Section::F64(v) => {
                    w.put_u8(KIND_F64);
                    w.put_f64_slice(v);
                }
                Section::U64(v) => {
                    w.put_u8(KIND_U64);
                    w.put_u64_slice(v);
                }
                Section::Bytes(v) => {
                    w.put_u8(KIND_BYTES);
                    w.put_u64(v.len() as u64);
                    w.put_bytes(v);
                }
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r.get_bytes(4)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic bytes {magic:02x?}")));
        }
        let version = r.get_u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container version {version} (this build reads {VERSION})"
            )));
        }
        let mut ckpt = Checkpoint::new();
        let n_manifest = r.get_u32()?;
        for _ in 0..n_manifest {
            let k = r.get_str()?;
            let v = r.get_str()?;
            ckpt.manifest.push((k, v));
        }
        let n_sections = r.get_u32()?;
        for _ in 0..n_sections {
            let name = r.get_str()?;
            let kind = r.get_u8()?;
            let section = match kind {
                KIND_NETWORK => {
                    let layer_sizes: Vec<usize> =
                        r.get_u64_vec()?.into_iter().map(|s| s as usize).collect();
                    let flat_params = r.get_f64_vec()?;
                    let adam = match r.get_u8()? {
                        0 => None,
                        1 => {
                            let step_count = r.get_u64()?;
                            let learning_rate = r.get_f64()?;
                            let beta1 = r.get_f64()?;
                            let beta2 = r.get_f64()?;
                            let epsilon_adam = r.get_f64()?;
                            let first_moment = r.get_f64_vec()?;
                            let second_moment = r.get_f64_vec()?;
                            Some(AdamState {
                                first_moment,
                                second_moment,
                                step_count,
                                learning_rate,
                                beta1,
                                beta2,
                                epsilon_adam,
                            })
                        }
                        k => {
                            return Err(Error::Checkpoint(format!("bad adam marker {k}")));
                        }
                    };
                    Section::Network(NetworkSnapshot { layer_sizes, flat_params, adam })
                }
                KIND_F64 => Section::F64(r.get_f64_vec()?),
                KIND_U64 => Section::U64(r.get_u64_vec()?),
                KIND_BYTES => {
                    let n = r.get_u64()? as usize;
                    Section::Bytes(r.get_bytes(n)?.to_vec())
                }
                k => return Err(Error::Checkpoint(format!("unknown section kind {k}"))),
            };
            ckpt.sections.push((name, section));
        }
        if !r.is_at_end() {
            return Err(Error::Checkpoint("trailing bytes after final section".into()));
        }
        Ok(ckpt)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_bytes(&bytes)
    }
}
