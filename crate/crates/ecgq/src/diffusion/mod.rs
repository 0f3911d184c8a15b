//! Denoising diffusion: forward corruption, training, and reverse sampling.
//!
//! The forward process corrupts a grid x₀ over T steps with variances β_t:
//!
//! ```text
//! x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε,   ε ~ N(0, I),   ᾱ_t = Π_{s≤t}(1−β_s)
//! ```
//!
//! A network ε̂(x_t, t) is trained to predict ε from the corrupted grid.
//! Reverse sampling runs either the stochastic ancestral chain (every step,
//! posterior variance β̃_t) or the deterministic strided chain (σ = 0), and
//! reconstruction limits the forward corruption to a depth λ ≤ T so that
//! clean structure survives and only off-manifold content is rewritten. Both
//! pixel grids and autoencoder latents are supported; the latent path wraps
//! the same chain between one encode and one decode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aslt::{from_model_output, NormalizedScalogram, GRID_COLS, GRID_ROWS};
use crate::dataset::ScalogramDataset;
use crate::error::{Error, Result};
use crate::nn::{AutoencoderDet, Sgd, TensorGrid, UNetLite};
use crate::rng::{derived_rng, fill_standard_normal};

/// Per-step variance tables of the forward process.
///
/// Tables are indexed 1..=T (index 0 holds the ᾱ₀ = 1 convention where it is
/// meaningful and a placeholder elsewhere).
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    t_max: usize,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    beta_tilde: Vec<f64>,
}

impl NoiseSchedule {
    /// Total step count T.
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// β_t for t in 1..=T.
    pub fn beta(&self, t: usize) -> f64 {
        debug_assert!((1..=self.t_max).contains(&t));
        self.beta[t]
    }

    /// α_t = 1 − β_t for t in 1..=T.
    pub fn alpha(&self, t: usize) -> f64 {
        debug_assert!((1..=self.t_max).contains(&t));
        self.alpha[t]
    }

    /// ᾱ_t for t in 0..=T, with ᾱ₀ = 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        debug_assert!(t <= self.t_max);
        self.alpha_bar[t]
    }

    /// Posterior variance β̃_t for t in 1..=T; β̃₁ = 0.
    pub fn beta_tilde(&self, t: usize) -> f64 {
        debug_assert!((1..=self.t_max).contains(&t));
        self.beta_tilde[t]
    }
}

/// Linear variance schedule between the given endpoints.
pub fn build_schedule(t_max: usize, beta_1: f64, beta_t: f64) -> Result<NoiseSchedule> {
    if t_max == 0 {
        return Err(Error::invalid("schedule needs at least one step"));
    }
    if !(beta_1 > 0.0 && beta_1 <= beta_t && beta_t < 1.0) {
        return Err(Error::invalid(format!(
            "schedule endpoints must satisfy 0 < β_1 ≤ β_T < 1, got ({beta_1}, {beta_t})"
        )));
    }
    let mut beta = vec![0.0; t_max + 1];
    let mut alpha = vec![0.0; t_max + 1];
    let mut alpha_bar = vec![0.0; t_max + 1];
    let mut beta_tilde = vec![0.0; t_max + 1];
    alpha_bar[0] = 1.0;
    for t in 1..=t_max {
        let frac = if t_max == 1 { 0.0 } else { (t - 1) as f64 / (t_max - 1) as f64 };
        beta[t] = beta_1 + frac * (beta_t - beta_1);
        alpha[t] = 1.0 - beta[t];
        alpha_bar[t] = alpha_bar[t - 1] * alpha[t];
        beta_tilde[t] = (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]) * beta[t];
    }
    Ok(NoiseSchedule { t_max, beta, alpha, alpha_bar, beta_tilde })
}

impl Default for NoiseSchedule {
    /// The canonical defaults: T = 1000, β linear from 1e−4 to 0.02.
    fn default() -> Self {
        build_schedule(1000, 1e-4, 0.02).expect("default endpoints are valid")
    }
}

/// a·x + b·y elementwise (shapes must already agree).
fn affine2(a: f64, x: &TensorGrid, b: f64, y: &TensorGrid) -> TensorGrid {
    debug_assert_eq!(x.shape(), y.shape());
    let data = x.data().iter().zip(y.data()).map(|(&xv, &yv)| a * xv + b * yv).collect();
    let (c, h, w) = x.shape();
    TensorGrid::from_parts(c, h, w, data)
}

/// Corrupt `x0` to depth `t` with the given standard-normal draw.
pub fn forward_noise(
    x0: &TensorGrid,
    t: usize,
    eps: &TensorGrid,
    sched: &NoiseSchedule,
) -> Result<TensorGrid> {
    if x0.shape() != eps.shape() {
        return Err(Error::ShapeMismatch(format!(
            "noise draw shape {:?} does not match input {:?}",
            eps.shape(),
            x0.shape()
        )));
    }
    if t < 1 || t > sched.t_max() {
        return Err(Error::invalid(format!("step {t} outside 1..={}", sched.t_max())));
    }
    let ab = sched.alpha_bar(t);
    Ok(affine2(ab.sqrt(), x0, (1.0 - ab).sqrt(), eps))
}

/// Anything that can estimate the noise component of a corrupted grid.
pub trait NoisePredictor {
    /// Predicted ε̂ for the grid at diffusion step `t`.
    fn predict_noise(&self, x: &TensorGrid, t: usize) -> Result<TensorGrid>;
}

impl NoisePredictor for UNetLite {
    fn predict_noise(&self, x: &TensorGrid, t: usize) -> Result<TensorGrid> {
        self.predict(x, t)
    }
}

/// One stochastic ancestral step x_t → x_{t−1}.
///
/// At t = 1 the posterior variance is zero and no random draw is consumed,
/// so chains of different depths stay on the same RNG stream prefix.
pub fn ddpm_reverse_step(
    model: &dyn NoisePredictor,
    x_t: &TensorGrid,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<TensorGrid> {
    if t < 1 || t > sched.t_max() {
        return Err(Error::invalid(format!("step {t} outside 1..={}", sched.t_max())));
    }
    let eps_hat = model.predict_noise(x_t, t)?;
    let alpha = sched.alpha(t);
    let coef = (1.0 - alpha) / (1.0 - sched.alpha_bar(t)).sqrt();
    let mut out = affine2(1.0 / alpha.sqrt(), x_t, -coef / alpha.sqrt(), &eps_hat);
    if t > 1 {
        let sd = sched.beta_tilde(t).sqrt();
        for v in out.data_mut() {
            *v += sd * crate::rng::standard_normal(rng);
        }
    }
    Ok(out)
}

/// One deterministic step x_t → x_{t_prev} (σ = 0).
pub fn ddim_reverse_step(
    model: &dyn NoisePredictor,
    x_t: &TensorGrid,
    t: usize,
    t_prev: usize,
    sched: &NoiseSchedule,
) -> Result<TensorGrid> {
    if t < 1 || t > sched.t_max() {
        return Err(Error::invalid(format!("step {t} outside 1..={}", sched.t_max())));
    }
    if t_prev >= t {
        return Err(Error::invalid(format!("target step {t_prev} must precede {t}")));
    }
    let eps_hat = model.predict_noise(x_t, t)?;
    let ab_t = sched.alpha_bar(t);
    let ab_p = sched.alpha_bar(t_prev);
    // x0̂ = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t, then re-noise deterministically to t_prev.
    let x0_hat = affine2(1.0 / ab_t.sqrt(), x_t, -(1.0 - ab_t).sqrt() / ab_t.sqrt(), &eps_hat);
    Ok(affine2(ab_p.sqrt(), &x0_hat, (1.0 - ab_p).sqrt(), &eps_hat))
}

/// Which representation the diffusion chain runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// Directly on the 32×256 normalized scalogram.
    Pixel,
    /// On the 4×8×64 code of the frozen autoencoder.
    Latent,
}

impl Space {
    pub fn as_str(&self) -> &'static str {
        match self {
            Space::Pixel => "pixel",
            Space::Latent => "latent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pixel" => Ok(Space::Pixel),
            "latent" => Ok(Space::Latent),
            other => Err(Error::invalid(format!("unknown space '{other}' (pixel|latent)"))),
        }
    }
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which reverse sampler to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Stochastic ancestral sampling, one network call per step.
    Ddpm,
    /// Deterministic strided sampling.
    Ddim,
}

impl Sampler {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sampler::Ddpm => "ddpm",
            Sampler::Ddim => "ddim",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ddpm" => Ok(Sampler::Ddpm),
            "ddim" => Ok(Sampler::Ddim),
            other => Err(Error::invalid(format!("unknown sampler '{other}' (ddpm|ddim)"))),
        }
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_stride() -> usize {
    10
}

/// How to run a λ-limited reconstruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub space: Space,
    pub sampler: Sampler,
    /// Diffusion depth; 0 makes reconstruction the identity.
    pub lambda: usize,
    /// Step width of the deterministic sampler (ignored by ddpm).
    #[serde(default = "default_stride")]
    pub ddim_stride: usize,
    /// Seed for the forward draw (and ddpm step noise). Callers that resolve
    /// seeds elsewhere (config files) may omit it.
    #[serde(default)]
    pub seed: u64,
}

impl ReconstructionConfig {
    pub fn validate(&self, t_max: usize) -> Result<()> {
        if self.lambda > t_max {
            return Err(Error::Config(format!(
                "diffusion depth λ = {} exceeds schedule length {t_max}",
                self.lambda
            )));
        }
        if self.sampler == Sampler::Ddim && self.ddim_stride == 0 {
            return Err(Error::Config("ddim stride must be positive".into()));
        }
        Ok(())
    }

    /// The depth actually used: ddim rounds λ down to a stride multiple.
    pub fn effective_lambda(&self) -> usize {
        match self.sampler {
            Sampler::Ddpm => self.lambda,
            Sampler::Ddim => self.lambda / self.ddim_stride * self.ddim_stride,
        }
    }

    /// Same config with a different seed (per-segment derivation).
    pub fn with_seed(&self, seed: u64) -> Self {
        ReconstructionConfig { seed, ..self.clone() }
    }
}

/// View a normalized scalogram as a 1-channel grid in [−1, 1].
pub fn grid_of(x: &NormalizedScalogram) -> TensorGrid {
    TensorGrid::from_parts(1, GRID_ROWS, GRID_COLS, x.x())
}

/// Run the reverse chain from depth `lambda` down to 0.
fn reverse_chain(
    model: &dyn NoisePredictor,
    x_lambda: TensorGrid,
    lambda: usize,
    cfg: &ReconstructionConfig,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<TensorGrid> {
    let mut x = x_lambda;
    match cfg.sampler {
        Sampler::Ddpm => {
            for t in (1..=lambda).rev() {
                x = ddpm_reverse_step(model, &x, t, sched, rng)?;
            }
        }
        Sampler::Ddim => {
            let mut t = lambda;
            while t > 0 {
                let t_prev = t - cfg.ddim_stride.min(t);
                x = ddim_reverse_step(model, &x, t, t_prev, sched)?;
                t = t_prev;
            }
        }
    }
    Ok(x)
}

/// Partially corrupt `x` to depth λ and denoise it back.
///
/// The corrupted-then-reconstructed grid stays close to `x` where `x` lies
/// on the clean-data manifold the model was trained on, and diverges where
/// it does not — that divergence is the noise score. λ = 0 is the identity.
pub fn reconstruct(
    model: &dyn NoisePredictor,
    autoencoder: Option<&AutoencoderDet>,
    x: &NormalizedScalogram,
    cfg: &ReconstructionConfig,
    sched: &NoiseSchedule,
) -> Result<NormalizedScalogram> {
    cfg.validate(sched.t_max())?;
    let lambda = cfg.effective_lambda();
    if lambda == 0 {
        return Ok(x.clone());
    }
    let ae = match cfg.space {
        Space::Pixel => None,
        Space::Latent => Some(autoencoder.ok_or_else(|| {
            Error::Config("latent-space reconstruction requires an autoencoder".into())
        })?),
    };

    let pixel = grid_of(x);
    let x0 = match ae {
        None => pixel,
        Some(ae) => ae.encode(&pixel)?,
    };

    let mut rng = derived_rng(cfg.seed, "reconstruct");
    let mut eps = TensorGrid::zeros(x0.c(), x0.h(), x0.w());
    fill_standard_normal(&mut rng, eps.data_mut());
    let x_lambda = forward_noise(&x0, lambda, &eps, sched)?;
    let out = reverse_chain(model, x_lambda, lambda, cfg, sched, &mut rng)?;

    let decoded = match ae {
        None => out,
        Some(ae) => ae.decode(&out)?,
    };
    from_model_output(decoded.data())
}

/// Hyperparameters shared by the training loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 1, batch_size: 16, lr: 1e-3, seed: 0 }
    }
}

/// A fixed training example for the denoiser: inputs of one loss evaluation.
#[derive(Debug, Clone)]
pub struct NoisedExample {
    pub x0: TensorGrid,
    pub t: usize,
    pub eps: TensorGrid,
}

/// One optimizer step on a batch of fixed examples; returns the batch loss.
///
/// Loss is the per-element mean squared error between the predicted and true
/// noise, averaged over the batch — so a network outputting zero on
/// standard-normal targets scores ≈ 1.
pub fn diffusion_batch_step(
    net: &mut UNetLite,
    opt: &mut Sgd,
    batch: &[NoisedExample],
    sched: &NoiseSchedule,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let mut loss_sum = 0.0;
    for ex in batch {
        let x_t = forward_noise(&ex.x0, ex.t, &ex.eps, sched)?;
        let (y, cache) = net.forward_train(&x_t, ex.t);
        let n = y.len() as f64;
        let mut gy = TensorGrid::zeros(y.c(), y.h(), y.w());
        let mut loss = 0.0;
        for i in 0..y.len() {
            let d = y.data()[i] - ex.eps.data()[i];
            loss += d * d;
            gy.data_mut()[i] = 2.0 * d / n;
        }
        loss_sum += loss / n;
        net.backward(&cache, &gy);
    }
    opt.step(net, 1.0 / batch.len() as f64)?;
    Ok(loss_sum / batch.len() as f64)
}

/// Convert every dataset item to the grid the chain runs on.
fn training_inputs(
    ds: &ScalogramDataset,
    autoencoder: Option<&AutoencoderDet>,
) -> Result<Vec<TensorGrid>> {
    ds.items()
        .iter()
        .map(|it| {
            let pixel = grid_of(&it.grid);
            match autoencoder {
                None => Ok(pixel),
                Some(ae) => ae.encode(&pixel),
            }
        })
        .collect()
}

/// Train the denoiser on clean data; returns per-epoch mean losses.
///
/// Pass the frozen autoencoder to train in latent space (inputs are encoded
/// once up front); pass `None` for pixel space. Noisy-labeled datasets are
/// refused — the model must only ever see the clean manifold.
pub fn train_diffusion(
    net: &mut UNetLite,
    ds: &ScalogramDataset,
    autoencoder: Option<&AutoencoderDet>,
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    ds.require_clean()?;
    if ds.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let inputs = training_inputs(ds, autoencoder)?;
    let mut opt = Sgd::new(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        shuffle(&mut order, &mut derived_rng(cfg.seed, &format!("train/epoch{epoch}/order")));
        let mut draw = derived_rng(cfg.seed, &format!("train/epoch{epoch}/draw"));
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<NoisedExample> = chunk
                .iter()
                .map(|&i| {
                    let x0 = inputs[i].clone();
                    let t = draw.random_range(1..=sched.t_max());
                    let mut eps = TensorGrid::zeros(x0.c(), x0.h(), x0.w());
                    fill_standard_normal(&mut draw, eps.data_mut());
                    NoisedExample { x0, t, eps }
                })
                .collect();
            epoch_loss += diffusion_batch_step(net, &mut opt, &batch, sched)?;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        log::info!("diffusion epoch {epoch}: loss {mean:.6}");
        trace.push(mean);
    }
    Ok(trace)
}

/// Train the autoencoder on clean data; returns per-epoch mean MSE.
pub fn train_autoencoder(
    ae: &mut AutoencoderDet,
    ds: &ScalogramDataset,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    ds.require_clean()?;
    if ds.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let inputs: Vec<TensorGrid> = ds.items().iter().map(|it| grid_of(&it.grid)).collect();
    let mut opt = Sgd::new(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        shuffle(&mut order, &mut derived_rng(cfg.seed, &format!("ae/epoch{epoch}/order")));
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut loss_sum = 0.0;
            for &i in chunk {
                let x = &inputs[i];
                let (y, cache) = ae.forward_train(x);
                let n = y.len() as f64;
                let mut gy = TensorGrid::zeros(y.c(), y.h(), y.w());
                let mut loss = 0.0;
                for j in 0..y.len() {
                    let d = y.data()[j] - x.data()[j];
                    loss += d * d;
                    gy.data_mut()[j] = 2.0 * d / n;
                }
                loss_sum += loss / n;
                ae.backward(&cache, &gy);
            }
            opt.step(ae, 1.0 / chunk.len() as f64)?;
            epoch_loss += loss_sum / chunk.len() as f64;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        log::info!("autoencoder epoch {epoch}: loss {mean:.6}");
        trace.push(mean);
    }
    Ok(trace)
}

/// Deterministic Fisher–Yates shuffle on the derived stream.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}
