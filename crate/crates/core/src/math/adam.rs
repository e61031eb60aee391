//! ADAM with bias correction and optional L2 regularisation folded into the
//! gradient.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Coefficient of the `l2 · θ` term added to the gradient.
    pub l2: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, l2: 0.0 }
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    /// First moment.
    pub m: Vec<f64>,
    /// Second (raw) moment.
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self { config, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }
}

/// One in-place ADAM update of `params` given `grads`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension { context: "adam gradients", expected: params.len(), actual: grads.len() });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Dimension { context: "adam moments", expected: params.len(), actual: state.m.len() });
    }
    let AdamConfig { learning_rate, beta1, beta2, epsilon, l2 } = state.config;
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - fmath::powf(beta1, t);
    let bc2 = 1.0 - fmath::powf(beta2, t);
    for i in 0..params.len() {
        let g = if l2 > 0.0 { grads[i] + l2 * params[i] } else { grads[i] };
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= learning_rate * m_hat / (fmath::sqrt(v_hat) + epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m = 0.1, v = 0.001; bias-corrected both equal 1 → Δ = α·1/(1+ε).
        let mut p = vec![2.0];
        let mut s = AdamState::new(AdamConfig::new(0.1), 1);
        adam_step(&mut p, &[1.0], &mut s).unwrap();
        assert_eq!(s.t, 1);
        let expected = 2.0 - 0.1 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - 1.9).abs() < 1e-6);
    }

    #[test]
    fn joint_update_equals_separate_updates() {
        let cfg = AdamConfig::new(0.05);
        let mut joint = vec![1.0, -3.0];
        let mut sj = AdamState::new(cfg, 2);
        let mut a = vec![1.0];
        let mut sa = AdamState::new(cfg, 1);
        let mut b = vec![-3.0];
        let mut sb = AdamState::new(cfg, 1);
        for step in 0..10 {
            let ga = 0.3 * step as f64 - 1.0;
            let gb = 2.0 / (step as f64 + 1.0);
            adam_step(&mut joint, &[ga, gb], &mut sj).unwrap();
            adam_step(&mut a, &[ga], &mut sa).unwrap();
            adam_step(&mut b, &[gb], &mut sb).unwrap();
        }
        assert_eq!(joint, vec![a[0], b[0]]);
    }

    #[test]
    fn l2_pulls_towards_zero() {
        let mut p = vec![5.0];
        let mut s = AdamState::new(AdamConfig::new(0.1).with_l2(1.0), 1);
        adam_step(&mut p, &[0.0], &mut s).unwrap();
        assert!(p[0] < 5.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(AdamConfig::default(), 2);
        assert!(adam_step(&mut p, &[0.0], &mut s).is_err());
        let mut s = AdamState::new(AdamConfig::default(), 3);
        assert!(adam_step(&mut p, &[0.0, 0.0], &mut s).is_err());
    }

    proptest! {
        #[test]
        fn zero_gradient_is_a_fixed_point(
            params in proptest::collection::vec(-10.0f64..10.0, 1..20),
            warmup in 0u64..50,
        ) {
            let mut p = params.clone();
            let mut s = AdamState::new(AdamConfig::new(1e-3), p.len());
            s.t = warmup;
            for _ in 0..5 {
                let zeros = vec![0.0; p.len()];
                adam_step(&mut p, &zeros, &mut s).unwrap();
            }
            prop_assert_eq!(p, params);
            prop_assert_eq!(s.t, warmup + 5);
            prop_assert!(s.v.iter().all(|&v| v >= 0.0));
        }
    }
}
