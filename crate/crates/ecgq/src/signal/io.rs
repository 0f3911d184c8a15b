//! Record ingestion and on-disk formats.
//!
//! Two interchange formats are supported:
//!
//! - CSV with columns `(time_s, value)` or `(value)`, optional header; the
//!   sampling rate always comes from the caller (flag or sidecar), never from
//!   the time column.
//! - Raw little-endian f32 (`<name>.f32le`) with a JSON sidecar
//!   (`<name>.json`) declaring `{fs, channel, labels, seed}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{LabelSet, SignalRecord};

/// Source format for [`ingest_record`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IngestFormat {
    /// CSV; `fs` must be supplied because the time column (if any) is not
    /// trusted to be uniform.
    Csv { fs: f64 },
    /// `<name>.f32le` payload with `<name>.json` sidecar.
    RawF32le,
}

/// JSON sidecar accompanying a raw f32le payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSidecar {
    pub fs: f64,
    pub channel: String,
    #[serde(default)]
    pub labels: LabelSet,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Read and validate a record from disk.
pub fn ingest_record(path: &Path, format: IngestFormat) -> Result<SignalRecord> {
    match format {
        IngestFormat::Csv { fs } => ingest_csv(path, fs),
        IngestFormat::RawF32le => ingest_raw(path),
    }
}

fn ingest_csv(path: &Path, fs: f64) -> Result<SignalRecord> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    let mut n_cols: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() > 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 1 or 2 columns, found {}", fields.len()),
            });
        }
        // A non-numeric first row is treated as a header.
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(e) => {
                if idx == 0 {
                    continue; // header row
                }
                return Err(Error::Parse { line: lineno, msg: e.to_string() });
            }
        };
        match n_cols {
            None => n_cols = Some(values.len()),
            Some(n) if n != values.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("inconsistent column count: {} vs {}", values.len(), n),
                })
            }
            _ => {}
        }
        let value = *values.last().expect("at least one column");
        if !value.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("non-finite value '{}'", fields.last().expect("non-empty")),
            });
        }
        samples.push(value);
    }
    let channel = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    SignalRecord::new(samples, fs, channel)
}

fn ingest_raw(path: &Path) -> Result<SignalRecord> {
    let sidecar_path = sidecar_for(path);
    let sidecar: RawSidecar = serde_json::from_str(&fs::read_to_string(&sidecar_path)?)?;
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!(
            "raw f32le payload length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    let mut samples = Vec::with_capacity(bytes.len() / 4);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4")) as f64;
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { index: i });
        }
        samples.push(v);
    }
    let mut rec = SignalRecord::new(samples, sidecar.fs, sidecar.channel)?
        .with_labels(sidecar.labels);
    rec.seed = sidecar.seed;
    Ok(rec)
}

/// Write `record` as `<dir>/<name>.f32le` plus its JSON sidecar; returns the
/// payload path. Samples are narrowed to f32.
pub fn write_raw_record(record: &SignalRecord, dir: &Path, name: &str) -> Result<PathBuf> {
    let payload_path = dir.join(format!("{name}.f32le"));
    let mut bytes = Vec::with_capacity(record.len() * 4);
    for &v in record.samples() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&payload_path, bytes)?;
    let sidecar = RawSidecar {
        fs: record.fs(),
        channel: record.channel.clone(),
        labels: record.labels.clone(),
        seed: record.seed,
    };
    fs::write(sidecar_for(&payload_path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(payload_path)
}

/// `<name>.json` path next to a `<name>.f32le` payload.
fn sidecar_for(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}
