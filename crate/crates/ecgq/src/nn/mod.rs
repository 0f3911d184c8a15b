//! Trainable components: a compact timestep-conditioned U-Net and a
//! deterministic autoencoder, with hand-derived backpropagation.
//!
//! The architectures are fixed rather than configurable graphs: every layer's
//! gradient is written out by hand and verified against central finite
//! differences, which keeps the crate free of a general autodiff engine.
//! All math runs in f64; parameters are kept f32-representable at every point
//! (initialization and each optimizer update round through f32), so the f32
//! checkpoint format is lossless and `load(save(model))` reproduces forward
//! passes bitwise.

pub mod autoencoder;
pub mod checkpoint;
pub mod layers;
pub mod optim;
pub mod unet;

pub use autoencoder::AutoencoderDet;
pub use checkpoint::{Checkpoint, ModelKind};
pub use optim::Sgd;
pub use unet::UNetLite;

use crate::error::{Error, Result};

/// A (channels, height, width) grid of f64 values, row-major within each
/// channel. The shape is fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl TensorGrid {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        TensorGrid { c, h, w, data: vec![0.0; c * h * w] }
    }

    /// Wrap existing data; validates length and finiteness.
    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "tensor data length {} ≠ {c}×{h}×{w}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite tensor entry at flat index {i}")));
        }
        Ok(TensorGrid { c, h, w, data })
    }

    /// Internal constructor without the finiteness scan; layer code builds
    /// tensors from already-validated arithmetic and must not panic on
    /// transient large values (the optimizer is the designated non-finite
    /// detector).
    pub(crate) fn from_parts(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), c * h * w);
        TensorGrid { c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One channel as a contiguous h×w slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let hw = self.h * self.w;
        &mut self.data[c * hw..(c + 1) * hw]
    }

    /// Row `h` of channel `c`.
    pub fn row(&self, c: usize, h: usize) -> &[f64] {
        let base = (c * self.h + h) * self.w;
        &self.data[base..base + self.w]
    }

    pub fn same_shape(&self, other: &TensorGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &TensorGrid) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Mean of squared entries.
    pub fn mean_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }
}

/// Uniform access to a model's named parameter tensors and their gradient
/// accumulators, in a fixed declaration order (checkpointing, SGD, and
/// deterministic gradient accumulation all rely on that order).
pub trait Parametrized {
    /// Visit `(name, shape, weights)` read-only.
    fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));

    /// Visit `(name, weights, grads)` mutably.
    fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>, &mut Vec<f64>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |_, _, w| n += w.len());
        n
    }

    fn zero_grads(&mut self) {
        self.for_each_param_mut(&mut |_, _, g| g.iter_mut().for_each(|v| *v = 0.0));
    }
}

/// Round a parameter slice through f32 so it is exactly representable in the
/// checkpoint format.
pub(crate) fn round_params_f32(w: &mut [f64]) {
    for v in w.iter_mut() {
        *v = *v as f32 as f64;
    }
}
