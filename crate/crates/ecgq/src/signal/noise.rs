//! Noise injection at calibrated SNR.
//!
//! Each kind builds an additive noise vector, then rescales it so the
//! realized SNR over the affected support hits the target exactly (the
//! measured noise power, not its nominal variance, enters the scale factor).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::derived_rng;
use crate::signal::{LabelSet, NoiseKind, NoiseSpec, SignalRecord};

/// Powerline interference frequency folded into static noise (Hz).
const POWERLINE_HZ: f64 = 50.0;
/// Fraction of static-noise power carried by the powerline component.
const POWERLINE_POWER_FRAC: f64 = 0.3;

/// Corrupt a clean record per `spec`. The output carries the single label of
/// the injected kind and remembers `seed`.
pub fn inject_noise(record: &SignalRecord, spec: &NoiseSpec, seed: u64) -> Result<SignalRecord> {
    spec.validate()?;
    if !record.is_clean() {
        return Err(Error::Contract(
            "noise injection requires a clean-labeled input record".to_string(),
        ));
    }

    let n = record.len();
    let fs = record.fs();
    let s = record.samples();
    let mut rng = derived_rng(seed, "noise");

    // Support over which SNR is defined, and the raw (unscaled) noise.
    let (lo, hi, mut noise) = match spec.kind {
        NoiseKind::Static => {
            let mut v = vec![0.0f64; n];
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            // White and powerline parts are each normalized to unit power,
            // then mixed 70/30 in power.
            let mut white = vec![0.0f64; n];
            for w in white.iter_mut() {
                *w = rng.sample::<f64, _>(StandardNormal);
            }
            normalize_power(&mut white, 1.0);
            let w_amp = (1.0 - POWERLINE_POWER_FRAC).sqrt();
            let p_amp = (2.0 * POWERLINE_POWER_FRAC).sqrt(); // sin² has mean power 1/2
            for (i, out) in v.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *out = w_amp * white[i]
                    + p_amp * (std::f64::consts::TAU * POWERLINE_HZ * t + phase).sin();
            }
            (0, n, v)
        }
        NoiseKind::Burst => {
            let (start_s, len_s) = spec.burst_window.expect("validated");
            let lo = (start_s * fs).round() as usize;
            let hi = ((start_s + len_s) * fs).round() as usize;
            if hi > n || lo >= hi {
                return Err(Error::invalid(format!(
                    "burst window ({start_s} s, {len_s} s) exceeds the {:.3} s record",
                    record.duration_s()
                )));
            }
            let mut v = vec![0.0f64; n];
            for out in v[lo..hi].iter_mut() {
                *out = rng.sample::<f64, _>(StandardNormal);
            }
            (lo, hi, v)
        }
        NoiseKind::BaselineDrift => {
            let f = spec.drift_hz.expect("validated");
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let v: Vec<f64> = (0..n)
                .map(|i| (std::f64::consts::TAU * f * (i as f64 / fs) + phase).sin())
                .collect();
            (0, n, v)
        }
    };

    // Scale the noise so that P_signal / P_noise over [lo, hi) equals the
    // target ratio exactly.
    let p_signal = mean_power(&s[lo..hi]);
    if p_signal <= 0.0 {
        return Err(Error::Degenerate(
            "signal power over the noise support is zero; SNR is undefined".to_string(),
        ));
    }
    let p_noise_raw = mean_power(&noise[lo..hi]);
    if p_noise_raw <= 0.0 {
        return Err(Error::Degenerate("generated noise has zero power".to_string()));
    }
    let p_noise_target = p_signal / 10f64.powf(spec.snr_db / 10.0);
    let scale = (p_noise_target / p_noise_raw).sqrt();
    for v in noise.iter_mut() {
        *v *= scale;
    }

    let samples: Vec<f64> = s.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let mut labels = LabelSet::new();
    labels.insert(spec.kind.label());
    Ok(SignalRecord::new(samples, fs, record.channel.clone())?
        .with_labels(labels)
        .with_seed(seed))
}

fn mean_power(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

fn normalize_power(v: &mut [f64], target: f64) {
    let p = mean_power(v);
    if p > 0.0 {
        let s = (target / p).sqrt();
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}

/// Realized SNR in dB of `noisy` against `clean` over the whole record.
/// Helper for tests and calibration reports.
pub fn realized_snr_db(clean: &SignalRecord, noisy: &SignalRecord) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::ShapeMismatch(format!(
            "records differ in length: {} vs {}",
            clean.len(),
            noisy.len()
        )));
    }
    let p_signal = clean.power();
    let p_noise = clean
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        / clean.len() as f64;
    if p_noise <= 0.0 {
        return Err(Error::Degenerate("zero noise power".to_string()));
    }
    Ok(10.0 * (p_signal / p_noise).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth_clean;

    fn clean() -> SignalRecord {
        synth_clean(72.0, 128.0, 10.0, 11).unwrap()
    }

    #[test]
    fn static_noise_hits_target_snr() {
        let c = clean();
        for &snr in &[-6.0, 0.0, 12.0, 24.0] {
            let noisy = inject_noise(&c, &NoiseSpec::static_noise(snr), 1).unwrap();
            let got = realized_snr_db(&c, &noisy).unwrap();
            assert!((got - snr).abs() < 0.5, "target {snr} dB, realized {got} dB");
        }
    }

    #[test]
    fn static_at_zero_db_matches_signal_power() {
        let c = clean();
        let noisy = inject_noise(&c, &NoiseSpec::static_noise(0.0), 2).unwrap();
        let p_signal = c.power();
        let p_noise = c
            .samples()
            .iter()
            .zip(noisy.samples())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            / c.len() as f64;
        assert!((p_noise / p_signal - 1.0).abs() < 0.12, "power ratio {}", p_noise / p_signal);
    }

    #[test]
    fn burst_confined_to_window() {
        let c = clean();
        let noisy = inject_noise(&c, &NoiseSpec::burst(0.0, 4.0, 1.0), 3).unwrap();
        let fs = c.fs();
        let lo = (4.0 * fs) as usize;
        let hi = (5.0 * fs) as usize;
        for i in 0..c.len() {
            if i < lo || i >= hi {
                assert_eq!(noisy.samples()[i], c.samples()[i], "sample {i} outside window changed");
            }
        }
        // Inside the window the noise must actually be there.
        assert!(noisy.samples()[lo..hi].iter().zip(&c.samples()[lo..hi]).any(|(a, b)| a != b));
    }

    #[test]
    fn burst_snr_over_window() {
        let c = clean();
        let noisy = inject_noise(&c, &NoiseSpec::burst(6.0, 2.0, 2.0), 4).unwrap();
        let fs = c.fs();
        let (lo, hi) = ((2.0 * fs) as usize, (4.0 * fs) as usize);
        let p_signal = mean_power(&c.samples()[lo..hi]);
        let p_noise = c.samples()[lo..hi]
            .iter()
            .zip(&noisy.samples()[lo..hi])
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            / (hi - lo) as f64;
        let got = 10.0 * (p_signal / p_noise).log10();
        assert!((got - 6.0).abs() < 0.5, "windowed SNR {got} dB");
    }

    #[test]
    fn burst_window_outside_record_rejected() {
        let c = clean();
        assert!(inject_noise(&c, &NoiseSpec::burst(0.0, 9.5, 1.0), 5).is_err());
        assert!(inject_noise(&c, &NoiseSpec::burst(0.0, 11.0, 1.0), 5).is_err());
    }

    #[test]
    fn high_snr_barely_perturbs() {
        let c = clean();
        let noisy = inject_noise(&c, &NoiseSpec::static_noise(60.0), 6).unwrap();
        let rms_clean = c.power().sqrt();
        let rms_diff = c
            .samples()
            .iter()
            .zip(noisy.samples())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
            / (c.len() as f64).sqrt();
        assert!(rms_diff / rms_clean < 0.002, "relative RMS {}", rms_diff / rms_clean);
    }

    #[test]
    fn requires_clean_input() {
        let c = clean();
        let noisy = inject_noise(&c, &NoiseSpec::static_noise(0.0), 7).unwrap();
        assert!(matches!(
            inject_noise(&noisy, &NoiseSpec::static_noise(0.0), 8),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn drift_is_slow_and_calibrated() {
        let c = clean();
        let noisy = inject_noise(&c, &NoiseSpec::baseline_drift(3.0, 0.2), 9).unwrap();
        let got = realized_snr_db(&c, &noisy).unwrap();
        assert!((got - 3.0).abs() < 0.5);
        // The injected component is a smooth sinusoid: its sample-to-sample
        // increments stay far below the clean signal's sharpest slopes.
        let drift: Vec<f64> = noisy.samples().iter().zip(c.samples()).map(|(a, b)| a - b).collect();
        let max_step = drift.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let amp = drift.iter().cloned().fold(0.0, |m: f64, v| m.max(v.abs()));
        // One step of sin(2πft) moves at most 2πf/fs of the amplitude.
        assert!(max_step <= amp * std::f64::consts::TAU * 0.2 / c.fs() * 1.01);
    }

    #[test]
    fn injection_is_deterministic() {
        let c = clean();
        let a = inject_noise(&c, &NoiseSpec::static_noise(0.0), 42).unwrap();
        let b = inject_noise(&c, &NoiseSpec::static_noise(0.0), 42).unwrap();
        assert_eq!(a, b);
    }
}
