//! Primitive layers with hand-derived backward passes.
//!
//! Conventions shared by every layer:
//!
//! - `forward` is `&self` and pure; training forwards return whatever cache
//!   the backward pass needs (usually the layer input).
//! - `backward` takes the cached input and the loss gradient w.r.t. the
//!   output, **accumulates** parameter gradients (callers zero them between
//!   optimizer steps), and returns the gradient w.r.t. the input.
//! - 3×3 convolutions use zero padding of 1; stride 1 preserves spatial size,
//!   stride 2 halves it (`⌈n/2⌉`).

use rand_chacha::ChaCha8Rng;

use crate::nn::{round_params_f32, TensorGrid};
use crate::rng::standard_normal;

/// Truncated-normal initialization, resampling draws with |z| > 2.
pub(crate) fn init_trunc_normal(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z = standard_normal(rng);
        if z.abs() <= 2.0 {
            out.push(z * std);
        }
    }
    round_params_f32(&mut out);
    out
}

/// 3×3 convolution with zero padding 1, stride 1 or 2.
#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
    /// Weights `[c_out][c_in][3][3]`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Conv3x3 {
    /// He-scaled init (σ = √(2/fan_in)): without normalization layers this
    /// is what keeps activation magnitudes roughly constant through depth.
    pub fn new(name: impl Into<String>, c_in: usize, c_out: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(stride == 1 || stride == 2, "only strides 1 and 2 are implemented");
        let std = (2.0 / (c_in * 9) as f64).sqrt();
        let w = init_trunc_normal(rng, c_out * c_in * 9, std);
        Conv3x3 {
            name: name.into(),
            c_in,
            c_out,
            stride,
            w,
            b: vec![0.0; c_out],
            gw: vec![0.0; c_out * c_in * 9],
            gb: vec![0.0; c_out],
        }
    }

    /// All-zero init for a network's final projection: the model then starts
    /// out predicting exactly zero, which puts the initial noise-prediction
    /// loss at the variance of the targets.
    pub fn new_zero(name: impl Into<String>, c_in: usize, c_out: usize, stride: usize) -> Self {
        assert!(stride == 1 || stride == 2, "only strides 1 and 2 are implemented");
        Conv3x3 {
            name: name.into(),
            c_in,
            c_out,
            stride,
            w: vec![0.0; c_out * c_in * 9],
            b: vec![0.0; c_out],
            gw: vec![0.0; c_out * c_in * 9],
            gb: vec![0.0; c_out],
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        match self.stride {
            1 => (h, w),
            _ => (h.div_ceil(2), w.div_ceil(2)),
        }
    }

    fn weight(&self, co: usize, ci: usize, kh: usize, kw: usize) -> f64 {
        self.w[((co * self.c_in + ci) * 3 + kh) * 3 + kw]
    }

    pub fn forward(&self, x: &TensorGrid) -> TensorGrid {
        assert_eq!(x.c(), self.c_in, "conv {}: input channels", self.name);
        match self.stride {
            1 => self.forward_s1(x),
            _ => self.forward_s2(x),
        }
    }

    /// Stride 1: nine shifted axpy passes per (c_out, c_in) pair; the inner
    /// loops run over contiguous rows and vectorize.
    fn forward_s1(&self, x: &TensorGrid) -> TensorGrid {
        let (h, w) = (x.h(), x.w());
        let mut out = TensorGrid::zeros(self.c_out, h, w);
        for co in 0..self.c_out {
            out.channel_mut(co).fill(self.b[co]);
        }
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                let xch = x.channel(ci);
                let och = out.channel_mut(co);
                for kh in 0..3 {
                    for kw in 0..3 {
                        let wv = self.weight(co, ci, kh, kw);
                        if wv == 0.0 {
                            continue;
                        }
                        // out[oh][ow] += wv · x[oh+kh−1][ow+kw−1]
                        let (oh_lo, oh_hi) = valid_rows(h, kh, 1);
                        for oh in oh_lo..oh_hi {
                            let ih = oh + kh - 1;
                            let orow = &mut och[oh * w..(oh + 1) * w];
                            let xrow = &xch[ih * w..(ih + 1) * w];
                            axpy_shift(orow, xrow, wv, kw);
                        }
                    }
                }
            }
        }
        out
    }

    fn forward_s2(&self, x: &TensorGrid) -> TensorGrid {
        let (h, w) = (x.h(), x.w());
        let (oh_n, ow_n) = self.out_dims(h, w);
        let mut out = TensorGrid::zeros(self.c_out, oh_n, ow_n);
        for co in 0..self.c_out {
            out.channel_mut(co).fill(self.b[co]);
        }
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                let xch = x.channel(ci);
                let och = out.channel_mut(co);
                for kh in 0..3 {
                    for kw in 0..3 {
                        let wv = self.weight(co, ci, kh, kw);
                        for oh in 0..oh_n {
                            let ih = (2 * oh + kh) as isize - 1;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            let xrow = &xch[ih as usize * w..(ih as usize + 1) * w];
                            let orow = &mut och[oh * ow_n..(oh + 1) * ow_n];
                            for (ow, o) in orow.iter_mut().enumerate() {
                                let iw = (2 * ow + kw) as isize - 1;
                                if iw >= 0 && iw < w as isize {
                                    *o += wv * xrow[iw as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulate gw/gb from `(x, gout)` and return the input gradient.
    pub fn backward(&mut self, x: &TensorGrid, gout: &TensorGrid) -> TensorGrid {
        assert_eq!(x.c(), self.c_in);
        assert_eq!(gout.c(), self.c_out);
        match self.stride {
            1 => self.backward_s1(x, gout),
            _ => self.backward_s2(x, gout),
        }
    }

    fn backward_s1(&mut self, x: &TensorGrid, gout: &TensorGrid) -> TensorGrid {
        let (h, w) = (x.h(), x.w());
        let mut gin = TensorGrid::zeros(self.c_in, h, w);
        for co in 0..self.c_out {
            let gch = gout.channel(co);
            self.gb[co] += gch.iter().sum::<f64>();
            for ci in 0..self.c_in {
                let xch = x.channel(ci);
                let ich = gin.channel_mut(ci);
                for kh in 0..3 {
                    let (oh_lo, oh_hi) = valid_rows(h, kh, 1);
                    for kw in 0..3 {
                        // dL/dw = Σ gout[oh][ow] · x[oh+kh−1][ow+kw−1]
                        let mut acc = 0.0;
                        for oh in oh_lo..oh_hi {
                            let ih = oh + kh - 1;
                            let grow = &gch[oh * w..(oh + 1) * w];
                            let xrow = &xch[ih * w..(ih + 1) * w];
                            acc += dot_shift(grow, xrow, kw);
                        }
                        self.gw[((co * self.c_in + ci) * 3 + kh) * 3 + kw] += acc;

                        // dL/dx[oh+kh−1][ow+kw−1] += wv · gout[oh][ow]
                        let wv = self.weight(co, ci, kh, kw);
                        if wv == 0.0 {
                            continue;
                        }
                        for oh in oh_lo..oh_hi {
                            let ih = oh + kh - 1;
                            let grow = &gch[oh * w..(oh + 1) * w];
                            let irow = &mut ich[ih * w..(ih + 1) * w];
                            axpy_shift_back(irow, grow, wv, kw);
                        }
                    }
                }
            }
        }
        gin
    }

    fn backward_s2(&mut self, x: &TensorGrid, gout: &TensorGrid) -> TensorGrid {
        let (h, w) = (x.h(), x.w());
        let (oh_n, ow_n) = self.out_dims(h, w);
        let mut gin = TensorGrid::zeros(self.c_in, h, w);
        for co in 0..self.c_out {
            let gch = gout.channel(co);
            self.gb[co] += gch.iter().sum::<f64>();
            for ci in 0..self.c_in {
                let xch = x.channel(ci);
                let ich = gin.channel_mut(ci);
                for kh in 0..3 {
                    for kw in 0..3 {
                        let mut acc = 0.0;
                        let wv = self.weight(co, ci, kh, kw);
                        for oh in 0..oh_n {
                            let ih = (2 * oh + kh) as isize - 1;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            let xrow = &xch[ih as usize * w..(ih as usize + 1) * w];
                            let irow = &mut ich[ih as usize * w..(ih as usize + 1) * w];
                            let grow = &gch[oh * ow_n..(oh + 1) * ow_n];
                            for (ow, &g) in grow.iter().enumerate() {
                                let iw = (2 * ow + kw) as isize - 1;
                                if iw >= 0 && iw < w as isize {
                                    acc += g * xrow[iw as usize];
                                    irow[iw as usize] += wv * g;
                                }
                            }
                        }
                        self.gw[((co * self.c_in + ci) * 3 + kh) * 3 + kw] += acc;
                    }
                }
            }
        }
        gin
    }

    pub fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(&format!("{}.w", self.name), &[self.c_out, self.c_in, 3, 3], &self.w);
        f(&format!("{}.b", self.name), &[self.c_out], &self.b);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>, &mut Vec<f64>)) {
        f(&format!("{}.w", self.name), &mut self.w, &mut self.gw);
        f(&format!("{}.b", self.name), &mut self.b, &mut self.gb);
    }
}

/// Output rows `oh` for which `oh·stride + kh − 1` is a valid input row.
fn valid_rows(h: usize, kh: usize, stride: usize) -> (usize, usize) {
    debug_assert_eq!(stride, 1);
    let lo = if kh == 0 { 1 } else { 0 };
    let hi = if kh == 2 { h - 1 } else { h };
    (lo, hi)
}

/// `out[ow] += a·x[ow + kw − 1]` over the valid overlap.
#[inline]
fn axpy_shift(out: &mut [f64], x: &[f64], a: f64, kw: usize) {
    let w = out.len();
    match kw {
        0 => {
            for (o, xv) in out[1..].iter_mut().zip(&x[..w - 1]) {
                *o += a * xv;
            }
        }
        1 => {
            for (o, xv) in out.iter_mut().zip(x) {
                *o += a * xv;
            }
        }
        _ => {
            for (o, xv) in out[..w - 1].iter_mut().zip(&x[1..]) {
                *o += a * xv;
            }
        }
    }
}

/// `Σ_ow g[ow]·x[ow + kw − 1]` over the valid overlap.
#[inline]
fn dot_shift(g: &[f64], x: &[f64], kw: usize) -> f64 {
    let w = g.len();
    match kw {
        0 => g[1..].iter().zip(&x[..w - 1]).map(|(a, b)| a * b).sum(),
        1 => g.iter().zip(x).map(|(a, b)| a * b).sum(),
        _ => g[..w - 1].iter().zip(&x[1..]).map(|(a, b)| a * b).sum(),
    }
}

/// Adjoint of [`axpy_shift`]: `gin[ow + kw − 1] += a·g[ow]`.
#[inline]
fn axpy_shift_back(gin: &mut [f64], g: &[f64], a: f64, kw: usize) {
    let w = g.len();
    match kw {
        0 => {
            for (i, gv) in gin[..w - 1].iter_mut().zip(&g[1..]) {
                *i += a * gv;
            }
        }
        1 => {
            for (i, gv) in gin.iter_mut().zip(g) {
                *i += a * gv;
            }
        }
        _ => {
            for (i, gv) in gin[1..].iter_mut().zip(&g[..w - 1]) {
                *i += a * gv;
            }
        }
    }
}

/// Sigmoid-weighted linear unit `x·σ(x)`.
pub fn silu_forward(x: &TensorGrid) -> TensorGrid {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = *v * sigmoid(*v);
    }
    out
}

/// Input gradient of SiLU given the pre-activation `x`.
pub fn silu_backward(x: &TensorGrid, gout: &TensorGrid) -> TensorGrid {
    debug_assert_eq!(x.shape(), gout.shape());
    let mut gin = gout.clone();
    for (g, &xv) in gin.data_mut().iter_mut().zip(x.data()) {
        let s = sigmoid(xv);
        *g *= s * (1.0 + xv * (1.0 - s));
    }
    gin
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// 2×2 average pooling, stride 2. Requires even spatial dims.
pub fn avgpool2_forward(x: &TensorGrid) -> TensorGrid {
    let (c, h, w) = x.shape();
    assert!(h % 2 == 0 && w % 2 == 0, "avgpool2 needs even dims, got {h}×{w}");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = TensorGrid::zeros(c, oh, ow);
    for ch in 0..c {
        let xc = x.channel(ch);
        let oc = out.channel_mut(ch);
        for r in 0..oh {
            let top = &xc[(2 * r) * w..(2 * r + 1) * w];
            let bot = &xc[(2 * r + 1) * w..(2 * r + 2) * w];
            let orow = &mut oc[r * ow..(r + 1) * ow];
            for (i, o) in orow.iter_mut().enumerate() {
                *o = 0.25 * (top[2 * i] + top[2 * i + 1] + bot[2 * i] + bot[2 * i + 1]);
            }
        }
    }
    out
}

/// Backward of 2×2 average pooling: spread each gradient over its 4 sources.
pub fn avgpool2_backward(gout: &TensorGrid) -> TensorGrid {
    let (c, oh, ow) = gout.shape();
    let (h, w) = (oh * 2, ow * 2);
    let mut gin = TensorGrid::zeros(c, h, w);
    for ch in 0..c {
        let gc = gout.channel(ch);
        let ic = gin.channel_mut(ch);
        for r in 0..oh {
            let grow = &gc[r * ow..(r + 1) * ow];
            for (i, &g) in grow.iter().enumerate() {
                let q = 0.25 * g;
                ic[(2 * r) * w + 2 * i] = q;
                ic[(2 * r) * w + 2 * i + 1] = q;
                ic[(2 * r + 1) * w + 2 * i] = q;
                ic[(2 * r + 1) * w + 2 * i + 1] = q;
            }
        }
    }
    gin
}

/// Nearest-neighbor 2× upsampling.
pub fn upsample2_forward(x: &TensorGrid) -> TensorGrid {
    let (c, h, w) = x.shape();
    let (oh, ow) = (h * 2, w * 2);
    let mut out = TensorGrid::zeros(c, oh, ow);
    for ch in 0..c {
        let xc = x.channel(ch);
        let oc = out.channel_mut(ch);
        for r in 0..h {
            let xrow = &xc[r * w..(r + 1) * w];
            for rep in 0..2 {
                let orow = &mut oc[(2 * r + rep) * ow..(2 * r + rep + 1) * ow];
                for (i, &v) in xrow.iter().enumerate() {
                    orow[2 * i] = v;
                    orow[2 * i + 1] = v;
                }
            }
        }
    }
    out
}

/// Backward of nearest 2× upsampling: sum each 2×2 replication block.
pub fn upsample2_backward(gout: &TensorGrid) -> TensorGrid {
    let (c, oh, ow) = gout.shape();
    assert!(oh % 2 == 0 && ow % 2 == 0);
    let (h, w) = (oh / 2, ow / 2);
    let mut gin = TensorGrid::zeros(c, h, w);
    for ch in 0..c {
        let gc = gout.channel(ch);
        let ic = gin.channel_mut(ch);
        for r in 0..h {
            let top = &gc[(2 * r) * ow..(2 * r + 1) * ow];
            let bot = &gc[(2 * r + 1) * ow..(2 * r + 2) * ow];
            let irow = &mut ic[r * w..(r + 1) * w];
            for (i, o) in irow.iter_mut().enumerate() {
                *o = top[2 * i] + top[2 * i + 1] + bot[2 * i] + bot[2 * i + 1];
            }
        }
    }
    gin
}

/// Stack `a`'s channels before `b`'s.
pub fn concat_channels(a: &TensorGrid, b: &TensorGrid) -> TensorGrid {
    assert_eq!((a.h(), a.w()), (b.h(), b.w()), "concat needs equal spatial dims");
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    TensorGrid::from_parts(a.c() + b.c(), a.h(), a.w(), data)
}

/// Split a gradient back into the two concatenated parts.
pub fn split_channels(g: &TensorGrid, c_a: usize) -> (TensorGrid, TensorGrid) {
    let (c, h, w) = g.shape();
    assert!(c_a < c);
    let hw = h * w;
    let (da, db) = g.data().split_at(c_a * hw);
    let a = TensorGrid::from_parts(c_a, h, w, da.to_vec());
    let b = TensorGrid::from_parts(c - c_a, h, w, db.to_vec());
    (a, b)
}

/// Sinusoidal timestep embedding: `dim/2` geometrically spaced frequencies,
/// sines then cosines. Injective over practical step ranges.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    assert!(dim >= 2 && dim % 2 == 0);
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    let ln_max = 10_000f64.ln();
    for i in 0..half {
        let freq = (-ln_max * i as f64 / (half - 1) as f64).exp();
        out.push((t as f64 * freq).sin());
    }
    for i in 0..half {
        let freq = (-ln_max * i as f64 / (half - 1) as f64).exp();
        out.push((t as f64 * freq).cos());
    }
    out
}

/// Learned affine map from the timestep embedding to one bias per channel.
#[derive(Debug, Clone)]
pub struct TimeAffine {
    pub name: String,
    pub channels: usize,
    pub dim: usize,
    /// Weights `[channels][dim]`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl TimeAffine {
    /// Small fixed scale: the timestep bias starts as a gentle perturbation
    /// rather than competing with the signal path.
    pub fn new(name: impl Into<String>, channels: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = init_trunc_normal(rng, channels * dim, 0.02);
        TimeAffine {
            name: name.into(),
            channels,
            dim,
            w,
            b: vec![0.0; channels],
            gw: vec![0.0; channels * dim],
            gb: vec![0.0; channels],
        }
    }

    /// Per-channel bias for this embedding.
    pub fn forward(&self, emb: &[f64]) -> Vec<f64> {
        debug_assert_eq!(emb.len(), self.dim);
        (0..self.channels)
            .map(|c| {
                let row = &self.w[c * self.dim..(c + 1) * self.dim];
                self.b[c] + row.iter().zip(emb).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Accumulate gradients from the per-channel bias gradient.
    pub fn backward(&mut self, emb: &[f64], g_bias: &[f64]) {
        debug_assert_eq!(g_bias.len(), self.channels);
        for c in 0..self.channels {
            let g = g_bias[c];
            self.gb[c] += g;
            let grow = &mut self.gw[c * self.dim..(c + 1) * self.dim];
            for (gw, &e) in grow.iter_mut().zip(emb) {
                *gw += g * e;
            }
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(&format!("{}.w", self.name), &[self.channels, self.dim], &self.w);
        f(&format!("{}.b", self.name), &[self.channels], &self.b);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>, &mut Vec<f64>)) {
        f(&format!("{}.w", self.name), &mut self.w, &mut self.gw);
        f(&format!("{}.b", self.name), &mut self.b, &mut self.gb);
    }
}

/// Add `bias[c]` to every cell of channel `c`.
pub fn add_channel_bias(x: &mut TensorGrid, bias: &[f64]) {
    debug_assert_eq!(x.c(), bias.len());
    for c in 0..x.c() {
        let b = bias[c];
        for v in x.channel_mut(c) {
            *v += b;
        }
    }
}

/// Per-channel sum of a gradient grid — the bias gradient.
pub fn channel_bias_grad(g: &TensorGrid) -> Vec<f64> {
    (0..g.c()).map(|c| g.channel(c).iter().sum()).collect()
}
