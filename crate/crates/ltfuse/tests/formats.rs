use ltfuse::formats::*;
use ltfuse_core::experts::PredictionMatrix;
use ltfuse_core::fusion::{FusionConfig, FusionModel};
use ltfuse_core::longtail::{
    draw_split, exponential_profile, holdout_split, synthetic_task, ClassCounts, FrequencyProfile, HeadTailBoundary,
    SplitOptions, SyntheticTaskConfig,
};
use ltfuse_core::metrics::{evaluate, EvalOptions};
use proptest::prelude::*;

fn matrix(k: usize, raw: Vec<Vec<f64>>) -> PredictionMatrix {
    let n = raw.len();
    let mut probs = Vec::new();
    for r in &raw {
        let s: f64 = r.iter().sum();
        probs.extend(r.iter().map(|x| x / s));
    }
    let labels = (0..n).map(|i| i % k).collect();
    PredictionMatrix::new(k, (0..n as u64).map(|i| 3 * i + 1).collect(), labels, probs).unwrap()
}

fn arb_matrix() -> impl Strategy<Value = PredictionMatrix> {
    (2usize..8, 1usize..20).prop_flat_map(|(k, n)| {
        prop::collection::vec(prop::collection::vec(1e-6f64..1.0, k), n).prop_map(move |raw| matrix(k, raw))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predictions_round_trip(m in arb_matrix()) {
        let mut buf = Vec::new();
        write_predictions(&m, &mut buf).unwrap();
        let back = read_predictions(buf.as_slice()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn counts_round_trip(v in prop::collection::vec(0usize..1000, 1..50)) {
        let c = ClassCounts::new(v).unwrap();
        let mut buf = Vec::new();
        write_counts_csv(&c, &mut buf).unwrap();
        prop_assert_eq!(read_counts_csv(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn metric_csvs_round_trip(m in arb_matrix(), bins in 1usize..12) {
        let dir = tempfile::tempdir().unwrap();
        let counts = ClassCounts::new((0..m.k()).map(|y| 10 + y).collect()).unwrap();
        let rows: Vec<&[f64]> = m.rows().collect();
        let r = evaluate(&rows, m.labels(), &counts, &EvalOptions { num_bins: bins, ..Default::default() }).unwrap();
        let p = dir.path().join("rel.csv");
        save_reliability(&r.reliability, &p).unwrap();
        prop_assert_eq!(load_reliability(&p).unwrap(), r.reliability);
        let p = dir.path().join("conf.csv");
        save_confusion(&r.confusion, &p).unwrap();
        prop_assert_eq!(load_confusion(&p).unwrap(), r.confusion);
        let cc = class_confidence(&rows, m.labels(), &counts);
        let p = dir.path().join("cc.csv");
        save_class_confidence(&cc, &p).unwrap();
        prop_assert_eq!(load_class_confidence(&p).unwrap(), cc);
    }
}

#[test]
fn split_round_trip_keeps_features_and_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let counts = exponential_profile(12, 30, 2).unwrap();
    let pool = synthetic_task(&counts, &SyntheticTaskConfig { dim: 3, separation: 2.0, eval_reserve: 6, seed: 5 }).unwrap();
    let profile = FrequencyProfile::Exponential { k: 12, n_max: 30, n_min: 2, rank_order: None };
    let mut split = draw_split(&pool, &counts, &SplitOptions::new(0.2, 5), Some(profile)).unwrap();
    let hs = holdout_split(&split, 0.5, 0.2, &HeadTailBoundary::median(&split.train_counts()), 5).unwrap();
    split.apply_holdout(&hs);
    let path = dir.path().join("split.json");
    save_split(&split, &path, "features.csv").unwrap();
    let back = load_split(&path).unwrap();
    assert_eq!(back, split);
    assert_eq!(load_counts(&path).unwrap(), split.train_counts());
}

#[test]
fn checkpoint_round_trip_and_shape_check() {
    let dir = tempfile::tempdir().unwrap();
    let counts = ClassCounts::new(vec![9, 5, 3, 1]).unwrap();
    let cfg = FusionConfig { degree: 2, filters: 3, ..Default::default() };
    let model = FusionModel::new(cfg, &counts).unwrap();
    let params = model.init_params(4);
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        k: 4,
        counts: counts.as_slice().to_vec(),
        variant: "dragon".into(),
        fusion: FusionBlocks::from_params(cfg, &params),
        per_class: None,
        mixture_gate: None,
    };
    let path = dir.path().join("ckpt.json");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.fusion.restore(&counts).unwrap().1, params);

    let mut bad = ckpt.clone();
    bad.fusion.blocks[0].values.pop();
    bad.save(&path).unwrap();
    let err = Checkpoint::load(&path).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("expected"), "{err}");
}

#[test]
fn config_errors_carry_field_paths() {
    let errs = parse_config(r#"{"scenario":"smooth-tail","seed":1,"grid":{"degrees":[5],"filters":[0],"learning_rates":[1e-3],"betas":[3]}}"#)
        .unwrap_err();
    let joined = errs.join("\n");
    for path in ["grid.degrees[0]", "grid.filters[0]", "grid.betas[0]", "data:"] {
        assert!(joined.contains(path), "missing {path} in {joined}");
    }
    let errs = parse_config(r#"{"scenario":"smooth-tail","seed":1,"bogus":2}"#).unwrap_err();
    assert!(errs[0].contains("bogus"), "{errs:?}");
    let errs = parse_config(r#"{"scenario":"smooth-tail","seed":"x"}"#).unwrap_err();
    assert!(errs[0].starts_with("seed"), "{errs:?}");
}
