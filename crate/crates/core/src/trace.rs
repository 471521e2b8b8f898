//! Sampled power waveform and its on-disk format.
//!
//! Trace file layout (little-endian): magic "SCTR", version u32 = 1,
//! sample_rate f64, clock f64, n_samples u64, then n_samples f32 samples.
//! A JSON sidecar (same basename + ".meta.json") carries the seed, laser
//! settings, scenario id and, for simulated traces, the true scalar hex.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leakage::LaserSpec;

pub const MAGIC: &[u8; 4] = b"SCTR";
pub const FORMAT_VERSION: u32 = 1;

/// 5 GS/s scope sampling.
pub const SAMPLE_RATE_HZ: f64 = 5.0e9;
/// 1250 samples per 4 MHz clock cycle.
pub const SAMPLES_PER_CYCLE: usize = 1250;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?} (expected SCTR)")]
    BadMagic([u8; 4]),
    #[error("unsupported trace format version {0}")]
    BadVersion(u32),
    #[error("truncated trace file: expected {expected} samples, got {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("meta sidecar error: {0}")]
    Meta(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    pub laser: LaserSpec,
    /// Hex of the scalar actually processed (simulated traces only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar_hex: Option<String>,
}

/// Sampled power waveform with acquisition metadata.
#[derive(Clone, Debug)]
pub struct Trace {
    pub sample_rate: f64,
    pub clock: f64,
    pub samples: Vec<f32>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn samples_per_cycle(&self) -> usize {
        (self.sample_rate / self.clock).round() as usize
    }

    pub fn cycles(&self) -> usize {
        self.samples.len() / self.samples_per_cycle()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&s| s as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Write the binary trace and its JSON sidecar next to it.
    pub fn write(&self, path: &Path) -> Result<(), TraceError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&self.clock.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        w.flush()?;
        let meta_path = sidecar_path(path);
        let mut mw = BufWriter::new(File::create(meta_path)?);
        serde_json::to_writer_pretty(&mut mw, &self.meta)?;
        mw.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Trace, TraceError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TraceError::BadMagic(magic));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(TraceError::BadVersion(version));
        }
        r.read_exact(&mut b8)?;
        let sample_rate = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let clock = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8);
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() as u64 != n * 4 {
            return Err(TraceError::Truncated {
                expected: n,
                got: raw.len() as u64 / 4,
            });
        }
        let samples = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let meta_path = sidecar_path(path);
        let meta = if meta_path.exists() {
            serde_json::from_reader(BufReader::new(File::open(meta_path)?))?
        } else {
            TraceMeta {
                scenario: String::new(),
                seed: 0,
                laser: LaserSpec::disabled(),
                scalar_hex: None,
            }
        };
        Ok(Trace {
            sample_rate,
            clock,
            samples,
            meta,
        })
    }
}

/// Sidecar next to a trace: same basename with a ".meta.json" extension
/// ("trace.sctr" -> "trace.meta.json").
pub fn sidecar_path(trace_path: &Path) -> std::path::PathBuf {
    trace_path.with_extension("meta.json")
}
