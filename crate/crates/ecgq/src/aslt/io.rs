//! Scalogram file format.
//!
//! Binary layout: magic `SCAL1`, `u32` rows, `u32` cols, `u8` dtype tag
//! (0 = u8 levels, 1 = f32 little-endian magnitudes), then the row-major
//! payload. All integers little-endian. Float scalograms carry their axis
//! coordinates in a JSON sidecar at `<path>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aslt::{NormalizedScalogram, Scalogram, GRID_COLS, GRID_ROWS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"SCAL1";
const DTYPE_U8: u8 = 0;
const DTYPE_F32: u8 = 1;

/// Axis metadata stored beside float scalograms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalogramSidecar {
    pub freqs: Vec<f64>,
    pub times: Vec<f64>,
    pub fs: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn write_header(buf: &mut Vec<u8>, rows: u32, cols: u32, dtype: u8) {
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    buf.push(dtype);
}

fn read_header(bytes: &[u8]) -> Result<(usize, usize, u8, &[u8])> {
    if bytes.len() < MAGIC.len() + 9 {
        return Err(Error::Format("scalogram file truncated before header end".into()));
    }
    if &bytes[..5] != MAGIC {
        return Err(Error::Format(format!(
            "bad scalogram magic {:?}, expected {:?}",
            &bytes[..5.min(bytes.len())],
            MAGIC
        )));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().expect("sliced 4")) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().expect("sliced 4")) as usize;
    let dtype = bytes[13];
    Ok((rows, cols, dtype, &bytes[14..]))
}

/// Write a float scalogram (dtype 1) and its JSON sidecar.
pub fn save_scalogram(path: &Path, sc: &Scalogram) -> Result<()> {
    let mut buf = Vec::with_capacity(14 + sc.grid().len() * 4);
    write_header(&mut buf, sc.rows() as u32, sc.cols() as u32, DTYPE_F32);
    for &v in sc.grid() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf)?;
    let sidecar = ScalogramSidecar { freqs: sc.freqs.clone(), times: sc.times.clone(), fs: sc.fs };
    fs::write(sidecar_path(path), serde_json::to_string(&sidecar)?)?;
    Ok(())
}

/// Load a float scalogram written by [`save_scalogram`].
pub fn load_scalogram(path: &Path) -> Result<Scalogram> {
    let bytes = fs::read(path)?;
    let (rows, cols, dtype, payload) = read_header(&bytes)?;
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("expected f32 scalogram (dtype 1), found dtype {dtype}")));
    }
    if payload.len() != rows * cols * 4 {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {} for {rows}×{cols} f32",
            payload.len(),
            rows * cols * 4
        )));
    }
    let grid: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
        .collect();
    let sidecar: ScalogramSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.freqs.len() != rows || sidecar.times.len() != cols {
        return Err(Error::Format(format!(
            "sidecar axes ({}×{}) disagree with payload ({rows}×{cols})",
            sidecar.freqs.len(),
            sidecar.times.len()
        )));
    }
    Scalogram::new(grid, sidecar.freqs, sidecar.times, sidecar.fs)
}

/// Write a normalized (u8, dtype 0) scalogram; self-contained, no sidecar.
pub fn save_normalized(path: &Path, ns: &NormalizedScalogram) -> Result<()> {
    let mut buf = Vec::with_capacity(14 + ns.levels().len());
    write_header(&mut buf, GRID_ROWS as u32, GRID_COLS as u32, DTYPE_U8);
    buf.extend_from_slice(ns.levels());
    fs::write(path, buf)?;
    Ok(())
}

/// Load a normalized scalogram written by [`save_normalized`].
pub fn load_normalized(path: &Path) -> Result<NormalizedScalogram> {
    let bytes = fs::read(path)?;
    let (rows, cols, dtype, payload) = read_header(&bytes)?;
    if dtype != DTYPE_U8 {
        return Err(Error::Format(format!("expected u8 scalogram (dtype 0), found dtype {dtype}")));
    }
    if rows != GRID_ROWS || cols != GRID_COLS {
        return Err(Error::Format(format!(
            "normalized scalogram must be {GRID_ROWS}×{GRID_COLS}, file is {rows}×{cols}"
        )));
    }
    if payload.len() != rows * cols {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            rows * cols
        )));
    }
    NormalizedScalogram::from_levels(payload.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aslt::{aslt_scalogram, to_model_input, AsltConfig};
    use crate::signal::synth_clean;

    #[test]
    fn float_scalogram_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = AsltConfig { n_freq_bins: 8, ..AsltConfig::default() };
        let s = synth_clean(60.0, 128.0, 2.0, 1).unwrap();
        let sc = aslt_scalogram(&s, &cfg).unwrap();
        let path = dir.path().join("a.scal");
        save_scalogram(&path, &sc).unwrap();
        let back = load_scalogram(&path).unwrap();
        assert_eq!(back.rows(), sc.rows());
        assert_eq!(back.cols(), sc.cols());
        assert_eq!(back.freqs, sc.freqs);
        // f32 narrowing: relative error within f32 precision.
        for (a, b) in sc.grid().iter().zip(back.grid()) {
            assert!((a - b).abs() <= a.abs() * 1e-6 + 1e-12);
        }
    }

    #[test]
    fn normalized_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = AsltConfig { n_freq_bins: 8, ..AsltConfig::default() };
        let s = synth_clean(60.0, 128.0, 2.0, 2).unwrap();
        let ns = to_model_input(&aslt_scalogram(&s, &cfg).unwrap());
        let path = dir.path().join("b.scal");
        save_normalized(&path, &ns).unwrap();
        let back = load_normalized(&path).unwrap();
        assert_eq!(back, ns);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.scal");
        fs::write(&path, b"NOPE!xxxxxxxxxxxx").unwrap();
        assert!(matches!(load_normalized(&path), Err(Error::Format(_))));
        assert!(matches!(load_scalogram(&path), Err(Error::Format(_))));
    }

    #[test]
    fn dtype_confusion_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = AsltConfig { n_freq_bins: 8, ..AsltConfig::default() };
        let s = synth_clean(60.0, 128.0, 2.0, 3).unwrap();
        let ns = to_model_input(&aslt_scalogram(&s, &cfg).unwrap());
        let path = dir.path().join("c.scal");
        save_normalized(&path, &ns).unwrap();
        assert!(matches!(load_scalogram(&path), Err(Error::Format(_))));
    }
}
