use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::LstmParams;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Global gradient-norm clip; 0 disables it.
    #[serde(default)]
    pub grad_clip: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 120,
            batch_size: 15,
            rng_seed: 0,
            grad_clip: 0.0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::Config(format!(
                "grad_clip must be non-negative, got {}",
                self.grad_clip
            )));
        }
        Ok(())
    }
}

/// Classical momentum velocity, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: LstmParams,
}

impl OptimizerState {
    pub fn new(params: &LstmParams) -> Self {
        Self {
            velocity: LstmParams::zeros(params.arch()),
        }
    }
}

/// `v <- momentum*v - lr*grad; params <- params + v`
pub fn sgdm_step(
    params: &mut LstmParams,
    grads: &LstmParams,
    state: &mut OptimizerState,
    hyper: &TrainHyper,
) {
    debug_assert_eq!(params.arch(), grads.arch());
    debug_assert_eq!(params.arch(), state.velocity.arch());
    let (lr, mu) = (hyper.learning_rate, hyper.momentum);
    for ((p, v), g) in params
        .iter_mut()
        .zip(state.velocity.iter_mut())
        .zip(grads.iter())
    {
        *v = mu * *v - lr * g;
        *p += *v;
    }
}

/// Rescales `grads` so its global norm is at most `max_norm`.
pub fn clip_gradient(grads: &mut LstmParams, max_norm: f64) {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Architecture;

    fn params_with(v: f64) -> LstmParams {
        let mut p = LstmParams::zeros(Architecture::new(2, 2).unwrap());
        p.fill(v);
        p
    }

    #[test]
    fn first_step_is_plain_gradient_descent() {
        let hyper = TrainHyper::default();
        let mut p = params_with(1.0);
        let g = params_with(0.5);
        let mut st = OptimizerState::new(&p);
        sgdm_step(&mut p, &g, &mut st, &hyper);
        assert!(p.iter().all(|&v| v == 1.0 - 0.01 * 0.5));
    }

    #[test]
    fn two_constant_steps_unroll() {
        let hyper = TrainHyper::default();
        let mut p = params_with(0.0);
        let g = params_with(2.0);
        let mut st = OptimizerState::new(&p);
        sgdm_step(&mut p, &g, &mut st, &hyper);
        sgdm_step(&mut p, &g, &mut st, &hyper);
        let expect = -0.01 * 2.0 * (2.0 + 0.9);
        assert!(p.iter().all(|&v| (v - expect).abs() < 1e-15));
    }

    #[test]
    fn zero_gradient_decays_velocity_geometrically() {
        let hyper = TrainHyper::default();
        let mut p = params_with(0.0);
        let mut st = OptimizerState::new(&p);
        st.velocity.fill(1.0);
        let zero = params_with(0.0);
        let mut prev_step: Option<f64> = None;
        for _ in 0..20 {
            let before = p.input_weights[0];
            sgdm_step(&mut p, &zero, &mut st, &hyper);
            let moved = p.input_weights[0] - before;
            if let Some(prev) = prev_step {
                assert!((moved / prev - 0.9f64).abs() < 1e-12);
            }
            prev_step = Some(moved);
        }
        // Total displacement approaches 0.9 / (1 - 0.9) = 9.
        assert!((p.input_weights[0] - 9.0).abs() < 9.0 * 0.9f64.powi(20) + 1e-9);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = params_with(3.0);
        clip_gradient(&mut g, 1.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let mut small = params_with(1e-3);
        let before = small.clone();
        clip_gradient(&mut small, 1.0);
        assert_eq!(small, before);
    }

    #[test]
    fn hyper_validation() {
        assert!(TrainHyper::default().validate().is_ok());
        let bad = [
            TrainHyper { learning_rate: 0.0, ..Default::default() },
            TrainHyper { momentum: 1.0, ..Default::default() },
            TrainHyper { batch_size: 0, ..Default::default() },
        ];
        for h in bad {
            assert!(h.validate().is_err());
        }
    }
}
