//! Deterministic convolutional autoencoder for the latent diffusion path.
//!
//! The encoder maps a 1×32×256 normalized scalogram to a 4×8×64 latent grid
//! through two stride-2 convolutions (4× spatial reduction, 2× overall
//! compression counting channels). The decoder mirrors it with
//! nearest-neighbor upsampling. Both halves are deterministic — no sampling,
//! no KL term — so the latent code is a fixed function of the input and the
//! whole pipeline stays reproducible. Trained standalone on clean data with
//! mean-squared reconstruction error, then frozen while the latent denoiser
//! trains on its codes.

use crate::error::{Error, Result};
use crate::nn::layers::{
    silu_backward, silu_forward, upsample2_backward, upsample2_forward, Conv3x3,
};
use crate::nn::{Parametrized, TensorGrid};
use crate::rng::derived_rng;

/// Hidden width of the single intermediate layer on each side.
const HIDDEN: usize = 48;
/// Latent channel count.
pub const LATENT_CHANNELS: usize = 4;

/// Two-level strided autoencoder, ~4.4k parameters.
#[derive(Debug, Clone)]
pub struct AutoencoderDet {
    enc1: Conv3x3,
    enc2: Conv3x3,
    dec1: Conv3x3,
    dec2: Conv3x3,
}

/// Activations retained for the training backward pass.
pub struct AutoencoderCache {
    x: TensorGrid,
    e_pre1: TensorGrid,
    e_act1: TensorGrid,
    z: TensorGrid,
    d_up1: TensorGrid,
    d_pre1: TensorGrid,
    d_up2: TensorGrid,
}

impl AutoencoderDet {
    /// Fresh autoencoder with seeded He-scaled truncated-normal weights.
    pub fn new(seed: u64) -> Self {
        let mut r1 = derived_rng(seed, "init/enc1");
        let mut r2 = derived_rng(seed, "init/enc2");
        let mut r3 = derived_rng(seed, "init/dec1");
        let mut r4 = derived_rng(seed, "init/dec2");
        AutoencoderDet {
            enc1: Conv3x3::new("enc1", 1, HIDDEN, 2, &mut r1),
            enc2: Conv3x3::new("enc2", HIDDEN, LATENT_CHANNELS, 2, &mut r2),
            dec1: Conv3x3::new("dec1", LATENT_CHANNELS, HIDDEN, 1, &mut r3),
            dec2: Conv3x3::new("dec2", HIDDEN, 1, 1, &mut r4),
        }
    }

    fn check_input(&self, x: &TensorGrid) -> Result<()> {
        let (c, h, w) = x.shape();
        if c != 1 {
            return Err(Error::ShapeMismatch(format!(
                "autoencoder expects 1 input channel, got {c}"
            )));
        }
        if h % 4 != 0 || w % 4 != 0 || h < 4 || w < 4 {
            return Err(Error::ShapeMismatch(format!(
                "spatial dims must be multiples of 4 for two stride-2 levels, got {h}×{w}"
            )));
        }
        Ok(())
    }

    /// Map an image to its latent code (c=4, h/4, w/4).
    pub fn encode(&self, x: &TensorGrid) -> Result<TensorGrid> {
        self.check_input(x)?;
        let act1 = silu_forward(&self.enc1.forward(x));
        Ok(self.enc2.forward(&act1))
    }

    /// Map a latent code back to image space.
    pub fn decode(&self, z: &TensorGrid) -> Result<TensorGrid> {
        let (c, ..) = z.shape();
        if c != LATENT_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "latent code must have {LATENT_CHANNELS} channels, got {c}"
            )));
        }
        let up1 = upsample2_forward(z);
        let act1 = silu_forward(&self.dec1.forward(&up1));
        let up2 = upsample2_forward(&act1);
        Ok(self.dec2.forward(&up2))
    }

    /// Full reconstruction pass retaining intermediates for training.
    pub fn forward_train(&self, x: &TensorGrid) -> (TensorGrid, AutoencoderCache) {
        let e_pre1 = self.enc1.forward(x);
        let e_act1 = silu_forward(&e_pre1);
        let z = self.enc2.forward(&e_act1);
        let d_up1 = upsample2_forward(&z);
        let d_pre1 = self.dec1.forward(&d_up1);
        let d_act1 = silu_forward(&d_pre1);
        let d_up2 = upsample2_forward(&d_act1);
        let y = self.dec2.forward(&d_up2);
        let cache = AutoencoderCache { x: x.clone(), e_pre1, e_act1, z, d_up1, d_pre1, d_up2 };
        (y, cache)
    }

    /// Accumulate parameter gradients; returns the input gradient.
    pub fn backward(&mut self, cache: &AutoencoderCache, gy: &TensorGrid) -> TensorGrid {
        let g_up2 = self.dec2.backward(&cache.d_up2, gy);
        let g_act1 = upsample2_backward(&g_up2);
        let g_pre1 = silu_backward(&cache.d_pre1, &g_act1);
        let g_up1 = self.dec1.backward(&cache.d_up1, &g_pre1);
        let gz = upsample2_backward(&g_up1);
        let g_eact1 = self.enc2.backward(&cache.e_act1, &gz);
        let g_epre1 = silu_backward(&cache.e_pre1, &g_eact1);
        self.enc1.backward(&cache.x, &g_epre1)
    }

    /// Latent code from the training cache (avoids re-encoding).
    pub fn cached_latent<'a>(&self, cache: &'a AutoencoderCache) -> &'a TensorGrid {
        &cache.z
    }
}

impl Parametrized for AutoencoderDet {
    fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.enc1.visit(f);
        self.enc2.visit(f);
        self.dec1.visit(f);
        self.dec2.visit(f);
    }

    fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>, &mut Vec<f64>)) {
        self.enc1.visit_mut(f);
        self.enc2.visit_mut(f);
        self.dec1.visit_mut(f);
        self.dec2.visit_mut(f);
    }
}
