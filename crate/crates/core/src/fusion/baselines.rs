//! Fixed fusion rules and the feature-gated mixture of experts.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::experts::PredictionMatrix;
use crate::math::{adam_step, sigmoid, AdamConfig, AdamState, CE_FLOOR};
use crate::rng::{derived_rng, salt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    Max,
    Avg,
    Product,
    Mixture,
}

/// Gate `λ(x) = σ(w · x + b)` over sample features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureGate {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl MixtureGate {
    pub fn lambda(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Dimension { context: "gate features", expected: self.weights.len(), actual: features.len() });
        }
        Ok(sigmoid(self.bias + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()))
    }
}

/// Elementwise max, mean, renormalised product, or gated mixture
/// `λ p_V + (1 − λ) p_S` of two expert rows.
pub fn fusion_baselines(
    p_v: &[f64],
    p_s: &[f64],
    mode: BaselineMode,
    gate: Option<(&MixtureGate, &[f64])>,
) -> Result<Vec<f64>> {
    if p_v.len() != p_s.len() {
        return Err(Error::Dimension { context: "baseline rows", expected: p_v.len(), actual: p_s.len() });
    }
    let pairs = p_v.iter().zip(p_s);
    Ok(match mode {
        BaselineMode::Max => pairs.map(|(a, b)| a.max(*b)).collect(),
        BaselineMode::Avg => pairs.map(|(a, b)| 0.5 * (a + b)).collect(),
        BaselineMode::Product => {
            let prod: Vec<f64> = pairs.map(|(a, b)| a * b).collect();
            let total: f64 = prod.iter().sum();
            if !(total > 0.0) {
                return Err(Error::DegenerateScore);
            }
            prod.into_iter().map(|p| p / total).collect()
        }
        BaselineMode::Mixture => {
            let (gate, x) = gate.ok_or_else(|| Error::Config("mixture fusion needs a trained gate".into()))?;
            let lam = gate.lambda(x)?;
            pairs.map(|(a, b)| lam * a + (1.0 - lam) * b).collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTraining {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for GateTraining {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 50, batch_size: 64, seed: 0 }
    }
}

/// Fits a mixture gate by minimising `−ln(λ p_V(y) + (1 − λ) p_S(y))` with ADAM.
pub fn train_mixture_gate(
    features: &[Vec<f64>],
    visual: &PredictionMatrix,
    semantic: &PredictionMatrix,
    opts: &GateTraining,
) -> Result<MixtureGate> {
    visual.check_aligned(semantic)?;
    if features.len() != visual.n() {
        return Err(Error::Dimension { context: "gate features", expected: visual.n(), actual: features.len() });
    }
    let dim = features.first().map_or(0, Vec::len);
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(Error::InvalidInput("gate needs non-empty features of equal length".into()));
    }
    let mut params = alloc::vec![0.0; dim + 1];
    let mut state = AdamState::new(AdamConfig::new(opts.learning_rate), dim + 1);
    let mut rng = derived_rng(opts.seed, salt::SHUFFLE);
    let mut order: Vec<usize> = (0..visual.n()).collect();
    let labels = visual.labels();
    let batch = opts.batch_size.max(1);
    for _ in 0..opts.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = alloc::vec![0.0; dim + 1];
            for &r in chunk {
                let x = &features[r];
                let z = params[dim] + params[..dim].iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                let lam = sigmoid(z);
                let (a, b) = (visual.row(r)[labels[r]], semantic.row(r)[labels[r]]);
                let mix = lam * a + (1.0 - lam) * b;
                let dz = -(a - b) / (mix + CE_FLOOR) * lam * (1.0 - lam) / chunk.len() as f64;
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += dz * xi;
                }
                grad[dim] += dz;
            }
            adam_step(&mut params, &grad, &mut state)?;
        }
    }
    let bias = params.pop().unwrap_or(0.0);
    if !bias.is_finite() || params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("mixture gate"));
    }
    Ok(MixtureGate { weights: params, bias })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identical_experts_agree_across_rules() {
        let p = [0.2, 0.5, 0.3];
        let max = fusion_baselines(&p, &p, BaselineMode::Max, None).unwrap();
        let avg = fusion_baselines(&p, &p, BaselineMode::Avg, None).unwrap();
        assert_eq!(max, p.to_vec());
        assert_eq!(avg, p.to_vec());
        let prod = fusion_baselines(&p, &p, BaselineMode::Product, None).unwrap();
        let sq: f64 = p.iter().map(|x| x * x).sum();
        for (a, b) in prod.iter().zip(&p) {
            assert!((a - b * b / sq).abs() < 1e-15);
        }
        // The renormalised square of a row sharpens it but keeps its argmax.
        assert_eq!(crate::math::argmax(&prod), 1);
    }

    #[test]
    fn hand_computed_rules() {
        assert_eq!(fusion_baselines(&[1.0, 0.0], &[0.0, 1.0], BaselineMode::Avg, None).unwrap(), vec![0.5, 0.5]);
        let prod = fusion_baselines(&[0.5, 0.5], &[0.9, 0.1], BaselineMode::Product, None).unwrap();
        assert!((prod[0] - 0.9).abs() < 1e-15 && (prod[1] - 0.1).abs() < 1e-15);
        assert!(fusion_baselines(&[1.0, 0.0], &[0.0, 1.0], BaselineMode::Product, None).is_err());
    }

    #[test]
    fn mixture_requires_a_gate() {
        assert!(fusion_baselines(&[0.5, 0.5], &[0.5, 0.5], BaselineMode::Mixture, None).is_err());
        let gate = MixtureGate { weights: vec![0.0], bias: 0.0 };
        let m = fusion_baselines(&[1.0, 0.0], &[0.0, 1.0], BaselineMode::Mixture, Some((&gate, &[3.0]))).unwrap();
        assert_eq!(m, vec![0.5, 0.5]);
    }

    #[test]
    fn gate_learns_which_expert_to_trust() {
        // Feature sign tells which expert is right.
        let n = 200;
        let mut pv = Vec::new();
        let mut ps = Vec::new();
        let mut feats = Vec::new();
        for i in 0..n {
            let visual_right = i % 2 == 0;
            pv.extend(if visual_right { [0.9, 0.1] } else { [0.1, 0.9] });
            ps.extend(if visual_right { [0.1, 0.9] } else { [0.9, 0.1] });
            feats.push(vec![if visual_right { 1.0 } else { -1.0 }]);
        }
        let ids: Vec<u64> = (0..n as u64).collect();
        let labels = vec![0; n];
        let v = PredictionMatrix::new(2, ids.clone(), labels.clone(), pv).unwrap();
        let s = PredictionMatrix::new(2, ids, labels, ps).unwrap();
        let gate = train_mixture_gate(&feats, &v, &s, &GateTraining { epochs: 100, ..Default::default() }).unwrap();
        assert!(gate.lambda(&[1.0]).unwrap() > 0.9);
        assert!(gate.lambda(&[-1.0]).unwrap() < 0.1);
    }
}
