//! Scalogram → model-input normalization.
//!
//! The magnitude grid is taken to log-power (`log10(m²)`), clipped to
//! `[−8, 0]` — the dynamic range that covers physiological scalogram content
//! — area-resized to a fixed 32×256 grid, quantized to `u8` grayscale levels,
//! and finally mapped to `[−1, 1]` for the diffusion model. The `u8` grid is
//! the canonical representation: the real-valued grid is always exactly
//! `2·(u8/255) − 1`, so quantize → dequantize is the identity and every
//! metric operates on the same 0–255 domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::aslt::Scalogram;

/// Fixed model-input height (frequency rows).
pub const GRID_ROWS: usize = 32;
/// Fixed model-input width (time columns).
pub const GRID_COLS: usize = 256;

/// Lower clip bound of the log-power grid.
pub const LOG_FLOOR: f64 = -8.0;
/// Upper clip bound of the log-power grid.
pub const LOG_CEIL: f64 = 0.0;

/// Quantized 32×256 model input. Invariant: `x()` values are exactly
/// `2·(level/255) − 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedScalogram {
    levels: Vec<u8>,
}

impl NormalizedScalogram {
    /// Wrap an existing 32×256 level grid.
    pub fn from_levels(levels: Vec<u8>) -> Result<Self> {
        if levels.len() != GRID_ROWS * GRID_COLS {
            return Err(Error::ShapeMismatch(format!(
                "normalized scalogram needs {}×{} levels, got {}",
                GRID_ROWS,
                GRID_COLS,
                levels.len()
            )));
        }
        Ok(NormalizedScalogram { levels })
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    /// The `[−1, 1]` real grid the model consumes.
    pub fn x(&self) -> Vec<f64> {
        self.levels.iter().map(|&u| 2.0 * (u as f64 / 255.0) - 1.0).collect()
    }

    pub fn level_at(&self, row: usize, col: usize) -> u8 {
        self.levels[row * GRID_COLS + col]
    }
}

/// Normalize a scalogram into the fixed 32×256 quantized model input.
pub fn to_model_input(sc: &Scalogram) -> NormalizedScalogram {
    // Log power, clipped. Magnitudes of 0 hit the −∞ branch of log10 and are
    // absorbed by the lower clip.
    let clipped: Vec<f64> = sc
        .grid()
        .iter()
        .map(|&m| {
            let lp = 2.0 * m.log10(); // log10(m²)
            lp.max(LOG_FLOOR).min(LOG_CEIL)
        })
        .collect();
    let resized = box_resize(&clipped, sc.rows(), sc.cols(), GRID_ROWS, GRID_COLS);
    let levels: Vec<u8> = resized
        .iter()
        .map(|&v| (255.0 * (v - LOG_FLOOR) / (LOG_CEIL - LOG_FLOOR)).round() as u8)
        .collect();
    NormalizedScalogram { levels }
}

/// Quantize a model output in `[−1, 1]` back to `u8` levels. Values are
/// clamped before quantization, so any real grid is accepted.
pub fn from_model_output(x: &[f64]) -> Result<NormalizedScalogram> {
    if x.len() != GRID_ROWS * GRID_COLS {
        return Err(Error::ShapeMismatch(format!(
            "model output needs {}×{} values, got {}",
            GRID_ROWS,
            GRID_COLS,
            x.len()
        )));
    }
    let levels: Vec<u8> = x
        .iter()
        .map(|&v| {
            let c = v.clamp(-1.0, 1.0);
            (255.0 * (c + 1.0) / 2.0).round() as u8
        })
        .collect();
    Ok(NormalizedScalogram { levels })
}

/// Exact area-average (box-filter) resize of a row-major grid.
///
/// Each destination cell averages the source region it covers, with
/// fractional source cells weighted by their overlap. This is deterministic,
/// alias-suppressing, exactly mean-preserving, and handles both up- and
/// down-scaling; it is applied separably along rows then columns.
pub fn box_resize(src: &[f64], src_rows: usize, src_cols: usize, dst_rows: usize, dst_cols: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_rows * src_cols, "source shape mismatch");
    assert!(src_rows > 0 && src_cols > 0 && dst_rows > 0 && dst_cols > 0);
    // Resize columns first (inner dimension), then rows.
    let cols_done = resize_axis(src, src_rows, src_cols, dst_cols, true);
    resize_axis(&cols_done, src_rows, dst_cols, dst_rows, false)
}

/// Resize one axis of a row-major grid to `dst_n` cells by exact fractional
/// box averaging. `along_cols` selects which axis shrinks/grows.
fn resize_axis(src: &[f64], rows: usize, cols: usize, dst_n: usize, along_cols: bool) -> Vec<f64> {
    let (src_n, other) = if along_cols { (cols, rows) } else { (rows, cols) };
    let ratio = src_n as f64 / dst_n as f64;
    let mut out = vec![0.0f64; other * dst_n];
    for d in 0..dst_n {
        let lo = d as f64 * ratio;
        let hi = (d + 1) as f64 * ratio;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(src_n);
        for o in 0..other {
            let mut acc = 0.0;
            for s in first..last {
                let cover = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                let v = if along_cols { src[o * cols + s] } else { src[s * cols + o] };
                acc += v * cover;
            }
            let value = acc / ratio;
            if along_cols {
                out[o * dst_n + d] = value;
            } else {
                out[d * cols + o] = value;
            }
        }
    }
    out
}
