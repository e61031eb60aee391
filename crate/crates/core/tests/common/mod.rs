#![allow(dead_code)]

use ltfuse_core::experts::PredictionMatrix;
use ltfuse_core::fusion::{FusionModel, FusionParams};
use ltfuse_core::math::softmax;
use rand::Rng;

pub fn random_row(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
    softmax(&logits).unwrap()
}

pub fn random_params(model: &FusionModel, rng: &mut impl Rng, scale: f64) -> FusionParams {
    let values = (0..model.layout().len).map(|_| rng.gen_range(-scale..scale)).collect();
    FusionParams::from_values(model.layout().clone(), values).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, k: usize, labels: &[usize]) -> PredictionMatrix {
    let probs: Vec<f64> = (0..n).flat_map(|_| random_row(rng, k)).collect();
    PredictionMatrix::new(k, (0..n as u64).collect(), labels.to_vec(), probs).unwrap()
}
