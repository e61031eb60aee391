mod common;

use common::{random_params, random_row};
use ltfuse_core::fusion::{FusionConfig, FusionLayout, FusionModel, FusionParams, LambdaMode, Weighting};
use ltfuse_core::longtail::{exponential_profile, ClassCounts};
use ltfuse_core::math::argmax;
use ltfuse_core::rng::rng_from_seed;
use rand::seq::SliceRandom;
use rand::Rng;

fn distinct_counts(rng: &mut impl Rng, k: usize) -> ClassCounts {
    let mut c: Vec<usize> = (0..k).map(|i| 5 + 7 * i).collect();
    c.shuffle(rng);
    ClassCounts::new(c).unwrap()
}

#[test]
fn forward_is_permutation_equivariant() {
    let mut rng = rng_from_seed(4);
    for _ in 0..100 {
        let k = rng.gen_range(3..10);
        let counts = distinct_counts(&mut rng, k);
        let cfg = FusionConfig { degree: 3, filters: 3, beta: 0.5, ..Default::default() };
        let model = FusionModel::new(cfg, &counts).unwrap();
        let params = random_params(&model, &mut rng, 0.5);
        let p_v = random_row(&mut rng, k);
        let p_s = random_row(&mut rng, k);
        let out = model.forward(&params, &p_v, Some(&p_s)).unwrap();

        let mut rho: Vec<usize> = (0..k).collect();
        rho.shuffle(&mut rng);
        let permute = |v: &[f64]| -> Vec<f64> { rho.iter().map(|&i| v[i]).collect() };
        let pc = ClassCounts::new(rho.iter().map(|&i| counts.get(i)).collect()).unwrap();
        let pm = FusionModel::new(cfg, &pc).unwrap();
        let pout = pm.forward(&params, &permute(&p_v), Some(&permute(&p_s))).unwrap();
        let expected = permute(&out.scores);
        let diff = pout.scores.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "max diff {diff}");
    }
}

#[test]
fn count_independent_smdragon_keeps_the_visual_argmax() {
    let mut rng = rng_from_seed(5);
    let k = 10;
    let counts = exponential_profile(k, 100, 2).unwrap();
    let cfg = FusionConfig { single_modality: true, weighting: Weighting::PerClass, degree: 3, filters: 2, ..Default::default() };
    let model = FusionModel::new(cfg, &counts).unwrap();
    for _ in 0..1000 {
        let mut params = random_params(&model, &mut rng, 1.0);
        let l = model.layout().clone();
        let b = params.block_mut(&l.head_v_b);
        for c in b.iter_mut().skip(1) {
            *c = 0.0;
        }
        let p_v = random_row(&mut rng, k);
        let s = model.smdragon_forward(&params, &p_v).unwrap();
        assert_eq!(argmax(&s), argmax(&p_v));
    }
}

#[test]
fn single_expert_matches_dual_with_tied_sides() {
    let mut rng = rng_from_seed(6);
    let k = 8;
    let counts = exponential_profile(k, 80, 3).unwrap();
    let single = FusionModel::new(FusionConfig { single_modality: true, ..Default::default() }, &counts).unwrap();
    let dual = FusionModel::new(FusionConfig::default(), &counts).unwrap();
    for _ in 0..50 {
        let sp = random_params(&single, &mut rng, 0.5);
        let sl = single.layout();
        let dl = dual.layout();
        let mut dp = FusionParams::zeros(dl.clone());
        // A 2x2 filter with a zero second column sees only the visual column.
        let fw = sp.block(&sl.conv_w).to_vec();
        for f in 0..sl.conv_b.len() {
            let w = dp.block_mut(&dl.conv_w);
            w[4 * f] = fw[2 * f];
            w[4 * f + 2] = fw[2 * f + 1];
        }
        dp.block_mut(&dl.conv_b).copy_from_slice(sp.block(&sl.conv_b));
        dp.block_mut(&dl.head_v_w).copy_from_slice(sp.block(&sl.head_v_w));
        dp.block_mut(&dl.head_v_b).copy_from_slice(sp.block(&sl.head_v_b));
        dp.block_mut(&dl.head_s_w).copy_from_slice(sp.block(&sl.head_v_w));
        dp.block_mut(&dl.head_s_b).copy_from_slice(sp.block(&sl.head_v_b));
        let p_v = random_row(&mut rng, k);
        let s1 = single.smdragon_forward(&sp, &p_v).unwrap();
        let out = dual.forward_with(&dp, &p_v, Some(&p_v), LambdaMode::Fixed(1.0)).unwrap();
        for y in 0..k {
            assert!((s1[y] - out.scores[y]).abs() < 1e-12);
            assert_eq!(out.w_v[y], out.w_s[y]);
        }
    }
}

#[test]
fn per_sample_weights_vary_per_class_weights_do_not() {
    let mut rng = rng_from_seed(7);
    let k = 6;
    let counts = exponential_profile(k, 60, 2).unwrap();
    let cfg = FusionConfig { degree: 2, filters: 2, ..Default::default() };
    let full = FusionModel::new(cfg, &counts).unwrap();
    let ablated = FusionModel::new(FusionConfig { weighting: Weighting::PerClass, ..cfg }, &counts).unwrap();
    assert!(ablated.layout().len < full.layout().len);
    let fp = random_params(&full, &mut rng, 0.5);
    let ap = random_params(&ablated, &mut rng, 0.5);
    let typical = [0.9, 0.02, 0.02, 0.02, 0.02, 0.02];
    let ambiguous = [0.3, 0.25, 0.2, 0.1, 0.1, 0.05];
    let (a, b) = (
        full.forward(&fp, &typical, Some(&ambiguous)).unwrap(),
        full.forward(&fp, &ambiguous, Some(&typical)).unwrap(),
    );
    assert!(a.w_v.iter().zip(&b.w_v).any(|(x, y)| (x - y).abs() > 1e-6));
    let (a, b) = (
        ablated.forward(&ap, &typical, Some(&ambiguous)).unwrap(),
        ablated.forward(&ap, &ambiguous, Some(&typical)).unwrap(),
    );
    assert_eq!(a.w_v, b.w_v);
    assert_eq!(a.w_s, b.w_s);
}

#[test]
fn parameter_budget_is_on_the_order_of_a_thousand() {
    let cfg = FusionConfig { degree: 3, filters: 2, ..Default::default() };
    let n = FusionLayout::new(200, &cfg).unwrap().len;
    assert!((1015.0 / 2.0..=1015.0 * 2.0).contains(&(n as f64)), "{n}");
}
