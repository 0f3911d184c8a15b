//! Plain SGD with classical momentum.
//!
//! The step is two-pass: first every accumulated gradient is checked for
//! finiteness, then — only if all pass — velocities and weights are updated.
//! A non-finite gradient therefore never corrupts the model; training aborts
//! with the offending tensor named. After each update every weight is rounded
//! through f32 so the in-memory model always matches what a checkpoint can
//! represent, keeping save/load bit-exact.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::nn::Parametrized;

/// Stochastic gradient descent with momentum and f32-rounded weights.
#[derive(Debug, Clone)]
pub struct Sgd {
    /// Learning rate.
    pub lr: f64,
    /// Momentum coefficient μ; 0 disables the velocity term.
    pub momentum: f64,
    vel: HashMap<String, Vec<f64>>,
}

impl Sgd {
    /// Optimizer with the given learning rate and momentum 0.9.
    pub fn new(lr: f64) -> Self {
        Sgd { lr, momentum: 0.9, vel: HashMap::new() }
    }

    /// Apply one update: v ← μ·v + g·scale, w ← w − lr·v.
    ///
    /// `scale` folds the batch-mean factor into the update so callers can
    /// accumulate raw per-example gradients. Gradients are cleared afterwards.
    pub fn step(&mut self, model: &mut dyn Parametrized, scale: f64) -> Result<()> {
        // Pass 1: refuse to touch anything if any gradient is non-finite.
        let mut bad: Option<String> = None;
        model.for_each_param_mut(&mut |name, _, g| {
            if bad.is_none() && g.iter().any(|v| !v.is_finite()) {
                bad = Some(name.to_string());
            }
        });
        if let Some(tensor) = bad {
            return Err(Error::NonFiniteGrad { tensor });
        }

        // Pass 2: momentum update, then round weights through f32.
        let lr = self.lr;
        let mu = self.momentum;
        let vel = &mut self.vel;
        model.for_each_param_mut(&mut |name, w, g| {
            let v = vel.entry(name.to_string()).or_insert_with(|| vec![0.0; w.len()]);
            for i in 0..w.len() {
                v[i] = mu * v[i] + g[i] * scale;
                w[i] = (w[i] - lr * v[i]) as f32 as f64;
                g[i] = 0.0;
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One-tensor toy model for exercising the optimizer contract.
    struct Toy {
        w: Vec<f64>,
        g: Vec<f64>,
    }

    impl Parametrized for Toy {
        fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
            f("toy.w", &[self.w.len()], &self.w);
        }
        fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f64>, &mut Vec<f64>)) {
            f("toy.w", &mut self.w, &mut self.g);
        }
    }

    #[test]
    fn momentum_update_matches_hand_computation() {
        let mut m = Toy { w: vec![1.0, -2.0], g: vec![0.5, 0.25] };
        let mut opt = Sgd::new(0.1);
        opt.step(&mut m, 1.0).unwrap();
        // v = g, w = w0 − 0.1·g
        assert_eq!(m.w[0], (1.0f64 - 0.05) as f32 as f64);
        assert_eq!(m.w[1], (-2.0f64 - 0.025) as f32 as f64);
        assert_eq!(m.g, vec![0.0, 0.0]);

        let w1 = m.w[0];
        m.g = vec![0.5, 0.25];
        opt.step(&mut m, 1.0).unwrap();
        // v = 0.9·v_prev + g = 0.95 → update is 0.1·0.95 on coord 0
        let expected0 = (w1 - 0.1 * (0.9 * 0.5 + 0.5)) as f32 as f64;
        assert!((m.w[0] - expected0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut m = Toy { w: vec![1.0], g: vec![f64::NAN] };
        let mut opt = Sgd::new(0.1);
        let err = opt.step(&mut m, 1.0).unwrap_err();
        match err {
            Error::NonFiniteGrad { tensor } => assert_eq!(tensor, "toy.w"),
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(m.w, vec![1.0], "weights must be untouched after a rejected step");
    }

    #[test]
    fn weights_stay_f32_representable() {
        let mut m = Toy { w: vec![0.1, 0.2, 0.3], g: vec![1e-3, -2e-3, 3e-3] };
        let mut opt = Sgd::new(1e-3);
        for _ in 0..10 {
            m.g = vec![1e-3, -2e-3, 3e-3];
            opt.step(&mut m, 0.5).unwrap();
        }
        for &w in &m.w {
            assert_eq!(w, w as f32 as f64);
        }
    }
}
