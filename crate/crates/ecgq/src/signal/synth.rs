//! Synthetic ECG generation.
//!
//! The waveform is a sum of five Gaussian bumps per beat (P, Q, R, S, T),
//! with offsets and widths proportional to the beat period and a small seeded
//! per-beat jitter on amplitudes and widths. This is deliberately the
//! simplest morphology with controllable peaks: the library quantifies noise,
//! it does not diagnose rhythms, so physiological fidelity beyond a plausible
//! PQRST shape buys nothing.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::derived_rng;
use crate::signal::{LabelSet, NoiseLabel, SignalRecord};

/// One bump of the PQRST complex, as fractions of the beat period.
struct Bump {
    /// Center offset from the R peak, in beat periods.
    offset: f64,
    /// Gaussian σ, in beat periods.
    width: f64,
    /// Peak amplitude (R = 1.0 reference).
    amp: f64,
}

const BUMPS: [Bump; 5] = [
    Bump { offset: -0.25, width: 0.045, amp: 0.15 },  // P
    Bump { offset: -0.06, width: 0.015, amp: -0.12 }, // Q
    Bump { offset: 0.0, width: 0.020, amp: 1.0 },     // R
    Bump { offset: 0.06, width: 0.018, amp: -0.25 },  // S
    Bump { offset: 0.30, width: 0.070, amp: 0.35 },   // T
];

/// Fractional jitter applied per beat to bump amplitudes and widths.
const JITTER: f64 = 0.05;

/// Synthesize a clean ECG-like record.
///
/// Deterministic in `(hr_bpm, fs, dur_s, seed)`. R peaks land at
/// `(i + 0.5)·60/hr_bpm` seconds, so a `dur_s`-second record carries
/// `round(dur_s·hr_bpm/60) ± 1` of them. The output is labeled `clean` and
/// remembers its seed.
pub fn synth_clean(hr_bpm: f64, fs: f64, dur_s: f64, seed: u64) -> Result<SignalRecord> {
    if !(30.0..=200.0).contains(&hr_bpm) {
        return Err(Error::invalid(format!(
            "heart rate must lie in [30, 200] bpm, got {hr_bpm}"
        )));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::invalid(format!("sampling rate must be positive, got {fs}")));
    }
    if !(dur_s.is_finite() && dur_s > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {dur_s}")));
    }

    let n = (dur_s * fs).round() as usize;
    if n == 0 {
        return Err(Error::invalid("duration too short for one sample"));
    }
    let period = 60.0 / hr_bpm;
    let n_beats = (dur_s / period).ceil() as usize + 1;

    let mut rng = derived_rng(seed, "synth");
    let mut samples = vec![0.0f64; n];
    for beat in 0..n_beats {
        let r_time = (beat as f64 + 0.5) * period;
        for bump in &BUMPS {
            // Jitter is drawn for every bump of every beat regardless of
            // whether the bump lands inside the record, so a record is a
            // prefix-stable function of (seed, duration).
            let aj: f64 = rng.random_range(-JITTER..=JITTER);
            let wj: f64 = rng.random_range(-JITTER..=JITTER);
            let amp = bump.amp * (1.0 + aj);
            let sigma = bump.width * period * (1.0 + wj);
            let center = r_time + bump.offset * period;
            add_gaussian(&mut samples, fs, center, sigma, amp);
        }
    }

    let mut labels = LabelSet::new();
    labels.insert(NoiseLabel::Clean);
    Ok(SignalRecord::new(samples, fs, "synthetic")?
        .with_labels(labels)
        .with_seed(seed))
}

/// Add `amp·exp(−(t−center)²/(2σ²))` over its ±4σ support.
fn add_gaussian(samples: &mut [f64], fs: f64, center: f64, sigma: f64, amp: f64) {
    let lo = (((center - 4.0 * sigma) * fs).floor().max(0.0)) as usize;
    let hi = ((((center + 4.0 * sigma) * fs).ceil()) as usize).min(samples.len().saturating_sub(1));
    if lo > hi {
        return;
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    for (i, v) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let dt = i as f64 / fs - center;
        *v += amp * (-dt * dt * inv).exp();
    }
}

/// Count R peaks: local maxima above `threshold_frac·max(samples)`, collapsed
/// within a 250 ms refractory window. Test oracle, not a clinical detector.
pub fn count_r_peaks(record: &SignalRecord, threshold_frac: f64) -> usize {
    let s = record.samples();
    let max = s.iter().cloned().fold(f64::MIN, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let thr = threshold_frac * max;
    let refractory = (0.25 * record.fs()).round() as usize;
    let mut peaks = 0usize;
    let mut last_peak: Option<usize> = None;
    for i in 1..s.len().saturating_sub(1) {
        if s[i] >= thr && s[i] >= s[i - 1] && s[i] > s[i + 1] {
            if let Some(lp) = last_peak {
                if i - lp < refractory {
                    continue;
                }
            }
            peaks += 1;
            last_peak = Some(i);
        }
    }
    peaks
}
