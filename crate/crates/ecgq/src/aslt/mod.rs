//! Adaptive superlet transform (ASLT).
//!
//! A superlet combines Morlet wavelets of increasing order (cycle count) at
//! the same center frequency: low orders localize in time, high orders in
//! frequency, and their geometric mean inherits the sharper of both. The
//! *adaptive* variant grows the maximum order linearly across the analysis
//! band, so slow rhythms keep temporal resolution while fast ones gain
//! spectral resolution.
//!
//! For a signal `s` and center frequency `f`, the order-`k` response is
//!
//! ```text
//! W_{f,k}(t) = √2 · (s ⊛ ψ*_{f,k})(t),   ψ_{f,k}(t) = (σ_k√(2π))⁻¹ · e^{i2πft} · e^{−t²/(2σ_k²)}
//! ```
//!
//! with `σ_k = k·n0/(k_sd·f)`, and the transform value is the geometric mean
//! `exp((1/K_f)·Σ_k ln(|W_{f,k}| + ε))` over orders `1..=K_f`, where the
//! order count `K_f` interpolates linearly over the band.

mod io;
mod normalize;

pub use io::{load_normalized, load_scalogram, save_normalized, save_scalogram, ScalogramSidecar};
pub use normalize::{
    box_resize, from_model_output, to_model_input, NormalizedScalogram, GRID_COLS, GRID_ROWS,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalRecord;

/// Analysis-band and superlet-order configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsltConfig {
    /// Lower band edge (Hz).
    pub f_min: f64,
    /// Upper band edge (Hz).
    pub f_max: f64,
    /// Number of log-spaced analysis frequencies before resizing.
    pub n_freq_bins: usize,
    /// Order count at `f_min`.
    pub o_min: usize,
    /// Order count at `f_max`.
    pub o_max: usize,
    /// Base cycle count; order `k` uses `n_k = k·n0` cycles.
    pub n0: f64,
    /// Gaussian-bandwidth constant relating cycles to σ: `σ = n_k/(k_sd·f)`.
    pub k_sd: f64,
    /// Stability constant added inside the geometric-mean logarithms.
    pub eps: f64,
}

impl Default for AsltConfig {
    fn default() -> Self {
        AsltConfig {
            f_min: 0.5,
            f_max: 40.0,
            n_freq_bins: 64,
            o_min: 1,
            o_max: 16,
            n0: 1.0,
            k_sd: 5.0,
            eps: 1e-12,
        }
    }
}

impl AsltConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min.is_finite() && self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(Error::invalid(format!(
                "frequency band must satisfy 0 < f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if self.n_freq_bins < 2 {
            return Err(Error::invalid("need at least 2 frequency bins"));
        }
        if self.o_min < 1 || self.o_min > self.o_max {
            return Err(Error::invalid(format!(
                "order limits must satisfy 1 ≤ o_min ≤ o_max, got [{}, {}]",
                self.o_min, self.o_max
            )));
        }
        if !(self.n0 > 0.0 && self.k_sd > 0.0 && self.eps > 0.0) {
            return Err(Error::invalid("n0, k_sd, and eps must be positive"));
        }
        Ok(())
    }

    /// Log-spaced analysis frequencies including both band edges.
    pub fn freq_grid(&self) -> Vec<f64> {
        let n = self.n_freq_bins;
        let log_ratio = (self.f_max / self.f_min).ln();
        (0..n)
            .map(|i| self.f_min * (log_ratio * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// F×T magnitude grid with its axis coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    rows: usize,
    cols: usize,
    /// Row-major magnitudes, all ≥ 0 and finite.
    grid: Vec<f64>,
    /// Center frequency per row (Hz), strictly increasing.
    pub freqs: Vec<f64>,
    /// Time per column (s).
    pub times: Vec<f64>,
    /// Sampling rate of the source signal.
    pub fs: f64,
}

impl Scalogram {
    pub fn new(grid: Vec<f64>, freqs: Vec<f64>, times: Vec<f64>, fs: f64) -> Result<Self> {
        let rows = freqs.len();
        let cols = times.len();
        if grid.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "grid length {} ≠ rows {} × cols {}",
                grid.len(),
                rows,
                cols
            )));
        }
        if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("scalogram entries must be finite and ≥ 0, found {v}")));
        }
        if !freqs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("frequencies must be strictly increasing"));
        }
        Ok(Scalogram { rows, cols, grid, freqs, times, fs })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.grid[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.grid[r * self.cols + c]
    }
}

/// Number of superlet orders used at frequency `f`: a linear ramp from
/// `o_min` at the lower band edge to `o_max` at the upper, rounded
/// half-away-from-zero.
pub fn order_count(f: f64, cfg: &AsltConfig) -> Result<usize> {
    if !(f >= cfg.f_min && f <= cfg.f_max) {
        return Err(Error::invalid(format!(
            "frequency {f} Hz outside analysis band [{}, {}]",
            cfg.f_min, cfg.f_max
        )));
    }
    let span = (cfg.o_max - cfg.o_min) as f64;
    let frac = (f - cfg.f_min) / (cfg.f_max - cfg.f_min);
    // f64::round rounds half away from zero, the fixed rule used everywhere
    // quantization appears in this crate.
    Ok(cfg.o_min + (span * frac).round() as usize)
}

/// Discretized complex Morlet wavelet at center frequency `f` and order `k`,
/// sampled at `fs` over `t ∈ [−3.5σ_k, +3.5σ_k]`.
#[derive(Debug, Clone)]
pub struct MorletKernel {
    /// Real part per tap: envelope × cos(2πft).
    pub re: Vec<f64>,
    /// Imaginary part per tap: envelope × sin(2πft).
    pub im: Vec<f64>,
    /// Index of t = 0 (kernel length is `2·half + 1`).
    pub half: usize,
    /// Gaussian width σ_k in seconds.
    pub sigma: f64,
}

/// Construct the order-`k` Morlet kernel. Truncation at ±3.5σ leaves less
/// than 5e−4 of the Gaussian mass outside the support.
pub fn morlet_kernel(f: f64, k: usize, fs: f64, cfg: &AsltConfig) -> Result<MorletKernel> {
    if k < 1 {
        return Err(Error::invalid("wavelet order must be ≥ 1"));
    }
    if !(f >= cfg.f_min && f <= cfg.f_max) {
        return Err(Error::invalid(format!(
            "frequency {f} Hz outside analysis band [{}, {}]",
            cfg.f_min, cfg.f_max
        )));
    }
    let n_cycles = k as f64 * cfg.n0;
    let sigma = n_cycles / (cfg.k_sd * f);
    let half = (3.5 * sigma * fs).floor() as usize;
    if half < 1 {
        return Err(Error::invalid(format!(
            "kernel support at f={f} Hz, order {k} spans fewer than 3 samples at fs={fs} Hz"
        )));
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let n = 2 * half + 1;
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 - half as f64) / fs;
        let env = norm * (-t * t / (2.0 * sigma * sigma)).exp();
        let angle = std::f64::consts::TAU * f * t;
        re.push(env * angle.cos());
        im.push(env * angle.sin());
    }
    Ok(MorletKernel { re, im, half, sigma })
}

/// Magnitude response `|√2 · (s ⊛ ψ*)(t)| / fs` of one wavelet, same length
/// as the signal with zero-padded edges. The `1/fs` factor turns the tap sum
/// into an integral approximation; the `√2` compensates for the analytic
/// wavelet capturing only half of a real signal's power.
pub fn wavelet_response(s: &SignalRecord, f: f64, k: usize, cfg: &AsltConfig) -> Result<Vec<f64>> {
    let kernel = morlet_kernel(f, k, s.fs(), cfg)?;
    Ok(wavelet_response_with(s.samples(), s.fs(), &kernel))
}

fn wavelet_response_with(s: &[f64], fs: f64, kernel: &MorletKernel) -> Vec<f64> {
    let n = s.len();
    let half = kernel.half as isize;
    let klen = kernel.re.len() as isize;
    let scale = std::f64::consts::SQRT_2 / fs;
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        // Valid kernel tap range for this output sample: the signal index
        // i + (j − half) must stay inside [0, n).
        let j_lo = (half - i).max(0);
        let j_hi = (half - i + n as isize).min(klen);
        let sig = &s[(i + j_lo - half) as usize..(i + j_hi - half) as usize];
        let kre = &kernel.re[j_lo as usize..j_hi as usize];
        let kim = &kernel.im[j_lo as usize..j_hi as usize];
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        for ((&x, &r), &m) in sig.iter().zip(kre).zip(kim) {
            acc_re += x * r;
            acc_im += x * m;
        }
        out.push(scale * (acc_re * acc_re + acc_im * acc_im).sqrt());
    }
    out
}

/// Compute the full adaptive superlet scalogram of a record.
///
/// Rows are the log-spaced frequency grid of `cfg`; each row is the geometric
/// mean of the order `1..=K_f` wavelet responses. Rows are independent and
/// computed in parallel; the result does not depend on the schedule.
pub fn aslt_scalogram(s: &SignalRecord, cfg: &AsltConfig) -> Result<Scalogram> {
    cfg.validate()?;
    if s.duration_s() < 1.0 {
        return Err(Error::invalid(format!(
            "signal must span at least 1 s for scalogram analysis, got {:.3} s",
            s.duration_s()
        )));
    }
    let freqs = cfg.freq_grid();
    let n = s.len();
    let rows: Vec<Result<Vec<f64>>> = freqs
        .par_iter()
        .map(|&f| -> Result<Vec<f64>> {
            let k_f = order_count(f, cfg)?;
            let mut log_sum = vec![0.0f64; n];
            for k in 1..=k_f {
                let kernel = morlet_kernel(f, k, s.fs(), cfg)?;
                let resp = wavelet_response_with(s.samples(), s.fs(), &kernel);
                for (acc, r) in log_sum.iter_mut().zip(&resp) {
                    *acc += (r + cfg.eps).ln();
                }
            }
            let inv_k = 1.0 / k_f as f64;
            Ok(log_sum.into_iter().map(|v| (v * inv_k).exp()).collect())
        })
        .collect();

    let mut grid = Vec::with_capacity(freqs.len() * n);
    for row in rows {
        grid.extend(row?);
    }
    let times: Vec<f64> = (0..n).map(|i| i as f64 / s.fs()).collect();
    Scalogram::new(grid, freqs, times, s.fs())
}
