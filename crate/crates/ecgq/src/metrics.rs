//! Reconstruction-fidelity metrics and distribution-level evaluation.
//!
//! Pointwise metrics (MAE, PSNR, SSIM) compare two quantized 0–255 grids —
//! always the quantized forms of input and reconstruction, which fixes the
//! PSNR peak at 255 and makes values comparable across runs. Distribution
//! metrics compare per-segment score populations: standardization removes
//! scale, the empirical Wasserstein-1 distance then measures how far apart
//! the clean and noisy score distributions sit.

use crate::aslt::NormalizedScalogram;
use crate::error::{Error, Result};

/// PSNR reported for a zero-error pair (keeps reports finite).
pub const PSNR_CAP_DB: f64 = 100.0;

/// SSIM stabilizers for the 0–255 domain.
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
/// SSIM sliding-window side length (uniform weights, stride 1).
pub const SSIM_WINDOW: usize = 8;

fn check_same_len(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "metric inputs must be equal-length and non-empty, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Mean absolute difference in quantization levels.
pub fn mae(a: &[u8], b: &[u8]) -> Result<f64> {
    check_same_len(a, b)?;
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio against the 255 peak, with a configurable cap
/// for the zero-error case.
pub fn psnr_with_cap(a: &[u8], b: &[u8], cap_db: f64) -> Result<f64> {
    check_same_len(a, b)?;
    let mse: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(cap_db);
    }
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(cap_db))
}

/// PSNR with the default 100 dB cap.
pub fn psnr(a: &[u8], b: &[u8]) -> Result<f64> {
    psnr_with_cap(a, b, PSNR_CAP_DB)
}

/// Mean local structural similarity over an 8×8 sliding window (stride 1,
/// uniform weights), in the usual two-term form:
///
/// ```text
/// SSIM = (2μxμy + C1)(2σxy + C2) / ((μx² + μy² + C1)(σx² + σy² + C2))
/// ```
///
/// Window statistics are population moments (divide by the cell count).
pub fn ssim(a: &[u8], b: &[u8], rows: usize, cols: usize) -> Result<f64> {
    check_same_len(a, b)?;
    if a.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "grid length {} does not match {rows}×{cols}",
            a.len()
        )));
    }
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::ShapeMismatch(format!(
            "grid {rows}×{cols} is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} SSIM window"
        )));
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=(rows - SSIM_WINDOW) {
        for c0 in 0..=(cols - SSIM_WINDOW) {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r0 + SSIM_WINDOW {
                let row_off = r * cols;
                for c in c0..c0 + SSIM_WINDOW {
                    let x = f64::from(a[row_off + c]);
                    let y = f64::from(b[row_off + c]);
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
            let mx = sx / n;
            let my = sy / n;
            let vx = sxx / n - mx * mx;
            let vy = syy / n - my * my;
            let cxy = sxy / n - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// A quantized original/reconstruction pair on the model grid.
#[derive(Debug, Clone)]
pub struct ScorePair {
    pub original: NormalizedScalogram,
    pub reconstructed: NormalizedScalogram,
}

impl ScorePair {
    pub fn mae(&self) -> f64 {
        mae(self.original.levels(), self.reconstructed.levels())
            .expect("normalized grids always share one shape")
    }

    pub fn psnr(&self) -> f64 {
        psnr(self.original.levels(), self.reconstructed.levels())
            .expect("normalized grids always share one shape")
    }

    pub fn ssim(&self) -> f64 {
        ssim(
            self.original.levels(),
            self.reconstructed.levels(),
            crate::aslt::GRID_ROWS,
            crate::aslt::GRID_COLS,
        )
        .expect("normalized grids always share one shape")
    }
}

/// A labeled population of per-segment scores.
#[derive(Debug, Clone)]
pub struct ErrorDistribution {
    pub label: String,
    values: Vec<f64>,
}

impl ErrorDistribution {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("score distribution must be non-empty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite score {bad} in distribution")));
        }
        Ok(ErrorDistribution { label: label.into(), values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which statistics drive the standardization shift/scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardizeMode {
    /// One mean/sd from the union of both samples (default): location
    /// differences between the two distributions survive the transform.
    Pooled,
    /// Each sample standardized by its own moments: only shape differences
    /// survive. Kept for comparison studies.
    PerDistribution,
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Standardize two score populations for distribution comparison.
pub fn standardize_with(
    p: &ErrorDistribution,
    q: &ErrorDistribution,
    mode: StandardizeMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let apply = |values: &[f64], mean: f64, sd: f64| -> Vec<f64> {
        values.iter().map(|v| (v - mean) / sd).collect()
    };
    match mode {
        StandardizeMode::Pooled => {
            let pooled: Vec<f64> =
                p.values().iter().chain(q.values()).copied().collect();
            if pooled.len() < 2 {
                return Err(Error::invalid("pooled standardization needs ≥ 2 values"));
            }
            let (mean, var) = moments(&pooled);
            if var <= 0.0 {
                return Err(Error::Degenerate(
                    "pooled variance is zero; scores are all identical".into(),
                ));
            }
            let sd = var.sqrt();
            Ok((apply(p.values(), mean, sd), apply(q.values(), mean, sd)))
        }
        StandardizeMode::PerDistribution => {
            let (mp, vp) = moments(p.values());
            let (mq, vq) = moments(q.values());
            if vp <= 0.0 || vq <= 0.0 {
                return Err(Error::Degenerate(
                    "per-distribution variance is zero".into(),
                ));
            }
            Ok((apply(p.values(), mp, vp.sqrt()), apply(q.values(), mq, vq.sqrt())))
        }
    }
}

/// Pooled standardization (the default mode).
pub fn standardize(
    p: &ErrorDistribution,
    q: &ErrorDistribution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    standardize_with(p, q, StandardizeMode::Pooled)
}

/// Empirical Wasserstein-1 distance between two 1-D samples.
///
/// Equal sizes use the sorted quantile pairing (1/n)·Σ|p₍ᵢ₎ − q₍ᵢ₎|; unequal
/// sizes integrate |CDF_P − CDF_Q| exactly over the merged support.
pub fn wasserstein1(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::invalid("wasserstein distance of an empty sample"));
    }
    if p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in wasserstein input"));
    }
    let mut ps = p.to_vec();
    let mut qs = q.to_vec();
    ps.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    qs.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));

    if ps.len() == qs.len() {
        let n = ps.len() as f64;
        return Ok(ps.iter().zip(&qs).map(|(a, b)| (a - b).abs()).sum::<f64>() / n);
    }

    // Sweep the merged support; between consecutive sample points the two
    // step CDFs are constant, so the integral is piecewise exact.
    let np = ps.len() as f64;
    let nq = qs.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    while i < ps.len() || j < qs.len() {
        let x = match (ps.get(i), qs.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!("loop guard"),
        };
        if let Some(x0) = prev {
            let fp = i as f64 / np;
            let fq = j as f64 / nq;
            total += (fp - fq).abs() * (x - x0);
        }
        while i < ps.len() && ps[i] <= x {
            i += 1;
        }
        while j < qs.len() && qs[j] <= x {
            j += 1;
        }
        prev = Some(x);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derived_rng, standard_normal};

    #[test]
    fn mae_known_values() {
        let a = vec![10u8; 64];
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let b = vec![12u8; 64];
        assert_eq!(mae(&a, &b).unwrap(), 2.0);
        let mut c = vec![10u8; 64];
        for v in c.iter_mut().take(32) {
            *v = 14;
        }
        assert_eq!(mae(&a, &c).unwrap(), 2.0);
        assert!(mae(&a, &[1u8, 2]).is_err());
    }

    #[test]
    fn psnr_known_values() {
        let a = vec![10u8; 64];
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let b = vec![11u8; 64];
        let expect = 20.0 * 255.0f64.log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-12);
        let zero = vec![0u8; 64];
        let full = vec![255u8; 64];
        assert!((psnr(&zero, &full).unwrap() - 0.0).abs() < 1e-12);
        assert_eq!(psnr_with_cap(&a, &a, 80.0).unwrap(), 80.0);
    }

    #[test]
    fn ssim_known_values() {
        let a = vec![100u8; 8 * 8];
        assert_eq!(ssim(&a, &a, 8, 8).unwrap(), 1.0);
        let zero = vec![0u8; 8 * 8];
        let full = vec![255u8; 8 * 8];
        // constant grids: contrast/structure terms are 1, luminance term is
        // C1/(255² + C1)
        let expect = SSIM_C1 / (255.0 * 255.0 + SSIM_C1);
        assert!((ssim(&zero, &full, 8, 8).unwrap() - expect).abs() < 1e-12);
        // window smaller than grid is required
        assert!(ssim(&[0u8; 16], &[0u8; 16], 4, 4).is_err());
    }

    #[test]
    fn ssim_bounded_and_symmetric() {
        let mut rng = derived_rng(1, "ssim");
        for trial in 0..5 {
            let a: Vec<u8> =
                (0..32 * 16).map(|_| (standard_normal(&mut rng) * 60.0 + 128.0) as u8).collect();
            let b: Vec<u8> =
                (0..32 * 16).map(|_| (standard_normal(&mut rng) * 60.0 + 128.0) as u8).collect();
            let s1 = ssim(&a, &b, 32, 16).unwrap();
            let s2 = ssim(&b, &a, 32, 16).unwrap();
            assert!((-1.0..=1.0).contains(&s1), "trial {trial}: {s1}");
            assert!((s1 - s2).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_falls_and_mae_rises_with_noise_level() {
        let mut rng = derived_rng(2, "noise-levels");
        let base: Vec<u8> = (0..32 * 64).map(|i| ((i * 7) % 200 + 20) as u8).collect();
        let sigmas = [2.0, 5.0, 10.0, 20.0, 40.0];
        let mut mean_psnr = Vec::new();
        let mut mean_mae = Vec::new();
        for &sigma in &sigmas {
            let (mut ps, mut ms) = (0.0, 0.0);
            for _ in 0..50 {
                let noisy: Vec<u8> = base
                    .iter()
                    .map(|&v| {
                        (f64::from(v) + sigma * standard_normal(&mut rng))
                            .clamp(0.0, 255.0)
                            .round() as u8
                    })
                    .collect();
                ps += psnr(&base, &noisy).unwrap();
                ms += mae(&base, &noisy).unwrap();
            }
            mean_psnr.push(ps / 50.0);
            mean_mae.push(ms / 50.0);
        }
        for k in 1..sigmas.len() {
            assert!(mean_psnr[k] < mean_psnr[k - 1], "psnr not decreasing: {mean_psnr:?}");
            assert!(mean_mae[k] > mean_mae[k - 1], "mae not increasing: {mean_mae:?}");
        }
    }

    #[test]
    fn standardize_two_point_example() {
        let p = ErrorDistribution::new("clean", vec![0.0, 2.0]).unwrap();
        let q = ErrorDistribution::new("noisy", vec![0.0, 2.0]).unwrap();
        let (sp, sq) = standardize(&p, &q).unwrap();
        assert_eq!(sp, vec![-1.0, 1.0]);
        assert_eq!(sq, vec![-1.0, 1.0]);
    }

    #[test]
    fn pooled_moments_after_standardization() {
        let p = ErrorDistribution::new("p", vec![3.0, 9.5, 4.25, 7.0, 8.0]).unwrap();
        let q = ErrorDistribution::new("q", vec![12.0, 15.5, 9.75]).unwrap();
        let (sp, sq) = standardize(&p, &q).unwrap();
        let pooled: Vec<f64> = sp.iter().chain(&sq).copied().collect();
        let (mean, var) = moments(&pooled);
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn standardization_is_affine_invariant() {
        let pv = vec![1.0, 2.0, 5.0, 7.0];
        let qv = vec![4.0, 4.5, 9.0];
        let (a, b) = (3.25, -11.0);
        let p1 = ErrorDistribution::new("p", pv.clone()).unwrap();
        let q1 = ErrorDistribution::new("q", qv.clone()).unwrap();
        let p2 =
            ErrorDistribution::new("p", pv.iter().map(|v| a * v + b).collect()).unwrap();
        let q2 =
            ErrorDistribution::new("q", qv.iter().map(|v| a * v + b).collect()).unwrap();
        let (s1p, s1q) = standardize(&p1, &q1).unwrap();
        let (s2p, s2q) = standardize(&p2, &q2).unwrap();
        for (x, y) in s1p.iter().zip(&s2p).chain(s1q.iter().zip(&s2q)) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_standardization_is_refused() {
        let p = ErrorDistribution::new("p", vec![5.0, 5.0]).unwrap();
        let q = ErrorDistribution::new("q", vec![5.0]).unwrap();
        assert!(matches!(standardize(&p, &q), Err(Error::Degenerate(_))));
        assert!(ErrorDistribution::new("p", vec![]).is_err());
        assert!(ErrorDistribution::new("p", vec![f64::NAN]).is_err());
    }

    #[test]
    fn per_distribution_mode_erases_location() {
        let p = ErrorDistribution::new("p", vec![0.0, 1.0, 2.0]).unwrap();
        let q = ErrorDistribution::new("q", vec![10.0, 11.0, 12.0]).unwrap();
        let (sp, sq) = standardize_with(&p, &q, StandardizeMode::PerDistribution).unwrap();
        assert_eq!(sp, sq, "same shape must standardize identically");
        let (pp, pq) = standardize(&p, &q).unwrap();
        assert_ne!(pp, pq, "pooled mode must keep the location shift");
    }

    #[test]
    fn wasserstein_known_values() {
        let p = vec![1.0, 2.0, 3.0];
        assert_eq!(wasserstein1(&p, &p).unwrap(), 0.0);
        let q = vec![2.0, 3.0, 4.0];
        assert!((wasserstein1(&p, &q).unwrap() - 1.0).abs() < 1e-12);
        assert!(wasserstein1(&p, &[]).is_err());
    }

    /// Minimal mean-cost matching over all permutations (n ≤ 6).
    fn brute_force_w1(p: &[f64], q: &[f64]) -> f64 {
        fn permute(rest: &mut Vec<usize>, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rest.is_empty() {
                out.push(chosen.clone());
                return;
            }
            for k in 0..rest.len() {
                let v = rest.remove(k);
                chosen.push(v);
                permute(rest, chosen, out);
                chosen.pop();
                rest.insert(k, v);
            }
        }
        let mut perms = Vec::new();
        permute(&mut (0..q.len()).collect(), &mut Vec::new(), &mut perms);
        perms
            .iter()
            .map(|perm| {
                p.iter().zip(perm).map(|(a, &j)| (a - q[j]).abs()).sum::<f64>() / p.len() as f64
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn quantile_formula_equals_brute_force_matching() {
        let mut rng = derived_rng(3, "w1-brute");
        for trial in 0..100 {
            let n = 1 + (trial % 6);
            let p: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng) * 3.0).collect();
            let q: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng) * 3.0).collect();
            let fast = wasserstein1(&p, &q).unwrap();
            let slow = brute_force_w1(&p, &q);
            assert!((fast - slow).abs() < 1e-12, "trial {trial}: {fast} vs {slow}");
        }
    }

    /// Replicate both samples to a common size and reuse the equal-size
    /// formula — an independent exact evaluation of the CDF integral.
    fn lcm_oracle_w1(p: &[f64], q: &[f64]) -> f64 {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let l = p.len() / gcd(p.len(), q.len()) * q.len();
        let expand = |v: &[f64]| -> Vec<f64> {
            let k = l / v.len();
            v.iter().flat_map(|&x| std::iter::repeat_n(x, k)).collect()
        };
        wasserstein1(&expand(p), &expand(q)).unwrap()
    }

    #[test]
    fn unequal_sizes_match_replication_oracle() {
        let mut rng = derived_rng(4, "w1-unequal");
        for trial in 0..50 {
            let n = 1 + (trial % 5);
            let m = 1 + ((trial * 7 + 3) % 6);
            let p: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng) * 2.0).collect();
            let q: Vec<f64> = (0..m).map(|_| standard_normal(&mut rng) * 2.0).collect();
            let sweep = wasserstein1(&p, &q).unwrap();
            let oracle = lcm_oracle_w1(&p, &q);
            assert!(
                (sweep - oracle).abs() < 1e-12,
                "trial {trial} ({n} vs {m}): {sweep} vs {oracle}"
            );
        }
    }

    #[test]
    fn symmetry_and_triangle_inequality() {
        let mut rng = derived_rng(5, "w1-triangle");
        for _ in 0..50 {
            let p: Vec<f64> = (0..4).map(|_| standard_normal(&mut rng)).collect();
            let q: Vec<f64> = (0..4).map(|_| standard_normal(&mut rng)).collect();
            let r: Vec<f64> = (0..4).map(|_| standard_normal(&mut rng)).collect();
            let pq = wasserstein1(&p, &q).unwrap();
            let qp = wasserstein1(&q, &p).unwrap();
            assert!((pq - qp).abs() < 1e-12);
            let qr = wasserstein1(&q, &r).unwrap();
            let pr = wasserstein1(&p, &r).unwrap();
            assert!(pr <= pq + qr + 1e-12);
        }
    }

    #[test]
    fn gaussian_mean_shift_closed_form() {
        // W₁(N(0,1), N(μ,1)) = |μ|
        let mut rng = derived_rng(6, "w1-gauss");
        let n = 100_000;
        let p: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let q: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng) + 0.5).collect();
        let w = wasserstein1(&p, &q).unwrap();
        assert!((w - 0.5).abs() < 0.02, "W₁ = {w}");
    }
}
