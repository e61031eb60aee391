mod common;

use common::{random_matrix, random_params};
use ltfuse_core::fusion::{FusionConfig, FusionData, FusionModel, FusionParams, SortBy, Weighting};
use ltfuse_core::longtail::exponential_profile;
use ltfuse_core::math::{balanced_class_weights, finite_diff_grad, relative_error};
use ltfuse_core::rng::rng_from_seed;
use rand::Rng;

fn check(seed: u64, weighting: Weighting, single: bool) -> f64 {
    let mut rng = rng_from_seed(seed);
    let k = rng.gen_range(4..=12);
    let cfg = FusionConfig {
        degree: [2, 3, 4][rng.gen_range(0..3)],
        filters: rng.gen_range(1..=4),
        sort_by: if single || rng.gen_bool(0.5) { SortBy::Visual } else { SortBy::Semantic },
        beta: rng.gen_range(-2.0..=2.0),
        single_modality: single,
        weighting,
        l2: if rng.gen_bool(0.5) { 1e-3 } else { 0.0 },
        learning_rate: 1e-3,
    };
    let counts = exponential_profile(k, rng.gen_range(20..200), rng.gen_range(1..5)).unwrap();
    let model = FusionModel::new(cfg, &counts).unwrap();
    let params = random_params(&model, &mut rng, 0.5);
    let n = 6;
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let v = random_matrix(&mut rng, n, k, &labels);
    let s = random_matrix(&mut rng, n, k, &labels);
    let data = FusionData::new(&v, if single { None } else { Some(&s) }).unwrap();
    let rows: Vec<usize> = (0..n).collect();
    let weights = balanced_class_weights(counts.as_slice()).unwrap();
    let cw = if rng.gen_bool(0.5) { Some(weights.as_slice()) } else { None };
    let analytic = model.loss_and_grad(&params, &data, &rows, cw).unwrap().grad;
    let numeric = finite_diff_grad(
        |x| model.loss(&FusionParams::from_values(model.layout().clone(), x.to_vec())?, &data, &rows, cw),
        &params.values,
        1e-5,
    )
    .unwrap();
    relative_error(&analytic, &numeric)
}

#[test]
fn full_model_gradients_on_twenty_random_instances() {
    for seed in 0..20 {
        let err = check(seed, Weighting::PerSample, false);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn ablation_and_single_expert_gradients() {
    for seed in 100..110 {
        assert!(check(seed, Weighting::PerClass, false) < 1e-4);
        assert!(check(seed, Weighting::PerSample, true) < 1e-4);
    }
}
