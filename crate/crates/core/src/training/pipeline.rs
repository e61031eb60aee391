use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fit::{EpochRecord, FitOptions, FitResult};
use super::grid::{grid_points, run_grid_point, GridContext, GridOutcome, LeaderboardEntry};
use super::{ExperimentConfig, FusionTrainSet, Scenario, SelectionMetric};
use crate::experts::{simulate_expert, ExpertProfile, PredictionMatrix};
use crate::fusion::{
    fusion_baselines, train_mixture_gate, BaselineMode, FusionConfig, FusionData, FusionModel, FusionParams,
    GateTraining, MixtureGate, Weighting,
};
use crate::longtail::{
    draw_split, holdout_split, synthetic_task, ClassCounts, DatasetSplit, Partition, SampleRecord, SplitOptions,
    SyntheticTaskConfig,
};
use crate::math::balanced_class_weights;
use crate::metrics::{evaluate, BucketedAccuracy, EvalOptions, MetricsReport};
use crate::rng::{derive_seed, salt};
use crate::{Error, Result};

/// Expert predictions (and optional sample features) for one set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePredictions {
    pub visual: PredictionMatrix,
    pub semantic: Option<PredictionMatrix>,
    pub features: Option<Vec<Vec<f64>>>,
}

impl StagePredictions {
    pub fn labels(&self) -> &[usize] {
        self.visual.labels()
    }

    pub fn len(&self) -> usize {
        self.visual.n()
    }

    pub fn is_empty(&self) -> bool {
        self.visual.n() == 0
    }

    fn data(&self, single: bool) -> Result<FusionData<'_>> {
        let s = if single { None } else { Some(self.semantic.as_ref().ok_or(Error::Empty("semantic predictions"))?) };
        FusionData::new(&self.visual, s)
    }
}

/// Inputs of stages 2 and 3: frozen stage-1 predictions on the fusion
/// training set and validation set, stage-3 predictions on the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    /// Full training counts: fed to the fusion module and to Acc_LT.
    pub counts: ClassCounts,
    /// Counts the stage-1 experts were fit on.
    pub fit_counts: ClassCounts,
    pub fusion_train: StagePredictions,
    pub validation: StagePredictions,
    pub test: StagePredictions,
    pub two_level_tail: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub acc_pc: f64,
    pub acc_lt: Option<f64>,
    pub acc_ms: Option<f64>,
    pub acc_fs: Option<f64>,
    pub acc_h: Option<f64>,
    pub buckets: BucketedAccuracy,
    pub ece: f64,
}

impl From<&MetricsReport> for MetricsSummary {
    fn from(r: &MetricsReport) -> Self {
        Self {
            n: r.n,
            acc_pc: r.acc_pc,
            acc_lt: r.acc_lt,
            acc_ms: r.acc_ms,
            acc_fs: r.acc_fs,
            acc_h: r.acc_h,
            buckets: r.buckets,
            ece: r.ece,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub metrics: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSizes {
    pub fit: usize,
    pub fusion_train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub scenario: Scenario,
    pub selection_metric: SelectionMetric,
    pub large_scale: bool,
    pub k: usize,
    pub counts: ClassCounts,
    pub sizes: SetSizes,
    pub best_config: FusionConfig,
    pub n_params: usize,
    /// Selected parameters in layout order.
    pub params: Vec<f64>,
    pub history: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_metric: f64,
    pub leaderboard: Vec<LeaderboardEntry>,
    pub per_class_config: FusionConfig,
    pub per_class_params: Vec<f64>,
    pub mixture_gate: Option<MixtureGate>,
    pub validation: Vec<MethodResult>,
    pub test: Vec<MethodResult>,
}

impl TrainReport {
    pub fn test_metrics(&self, method: &str) -> Option<&MetricsSummary> {
        self.test.iter().find(|m| m.method == method).map(|m| &m.metrics)
    }

    pub fn validation_metrics(&self, method: &str) -> Option<&MetricsSummary> {
        self.validation.iter().find(|m| m.method == method).map(|m| &m.metrics)
    }

    /// Model and parameters of the selected grid point.
    pub fn fusion(&self) -> Result<(FusionModel, FusionParams)> {
        restore(self.best_config, &self.counts, &self.params)
    }

    pub fn per_class_fusion(&self) -> Result<(FusionModel, FusionParams)> {
        restore(self.per_class_config, &self.counts, &self.per_class_params)
    }
}

fn restore(config: FusionConfig, counts: &ClassCounts, values: &[f64]) -> Result<(FusionModel, FusionParams)> {
    let model = FusionModel::new(config, counts)?;
    let params = FusionParams::from_values(model.layout().clone(), values.to_vec())?;
    Ok((model, params))
}

fn stage_profile(p: &ExpertProfile, stage: u64) -> ExpertProfile {
    ExpertProfile { seed: derive_seed(p.seed, stage), ..p.clone() }
}

fn subset(split: &DatasetSplit, idx: &[usize]) -> Vec<SampleRecord> {
    idx.iter().map(|&i| split.samples[i].clone()).collect()
}

fn stage_predictions(
    samples: &[SampleRecord],
    counts: &ClassCounts,
    visual: &ExpertProfile,
    semantic: Option<&ExpertProfile>,
) -> Result<StagePredictions> {
    let features = samples.iter().map(|s| s.features.clone()).collect::<Option<Vec<_>>>();
    Ok(StagePredictions {
        visual: simulate_expert(samples, counts, visual)?,
        semantic: semantic.map(|p| simulate_expert(samples, counts, p)).transpose()?,
        features,
    })
}

/// Draws the synthetic task of `config` and runs stages 1 and 3 with
/// simulated experts.
pub fn prepare_synthetic(config: &ExperimentConfig) -> Result<(DatasetSplit, PreparedData)> {
    config.validate()?;
    let d = config.data.as_ref().ok_or_else(|| Error::Config("synthetic task needs a data section".into()))?;
    let requested = d.profile.counts()?;
    let pool = synthetic_task(
        &requested,
        &SyntheticTaskConfig {
            dim: d.dim,
            separation: d.separation,
            eval_reserve: d.eval_reserve,
            seed: derive_seed(config.seed, salt::TASK),
        },
    )?;
    let mut split = draw_split(&pool, &requested, &SplitOptions::new(d.val_fraction, config.seed), Some(d.profile.clone()))?;
    let counts = split.train_counts();
    let (fit_idx, fusion_idx) = if config.large_scale {
        let all = split.training_indices();
        (all.clone(), all)
    } else {
        let hs = holdout_split(
            &split,
            config.holdout_tail_fraction,
            config.holdout_head_fraction,
            &d.profile.boundary(&counts),
            config.seed,
        )?;
        if hs.holdout.is_empty() {
            return Err(Error::Empty("hold-out set"));
        }
        split.apply_holdout(&hs);
        let fusion = match config.fusion_train_set {
            FusionTrainSet::Holdout => hs.holdout.clone(),
            FusionTrainSet::HoldoutAndFit => split.training_indices(),
        };
        (hs.fit, fusion)
    };
    let fit_counts = split.counts_of(&fit_idx);
    let single = config.scenario == Scenario::VisionOnly;
    let v1 = stage_profile(&config.experts.visual, salt::STAGE_FIT);
    let s1 = stage_profile(&config.experts.semantic, salt::STAGE_FIT);
    let v3 = stage_profile(&config.experts.visual, salt::STAGE_REFIT);
    let s3 = stage_profile(&config.experts.semantic, salt::STAGE_REFIT);
    let sem1 = (!single).then_some(&s1);
    let sem3 = (!single).then_some(&s3);
    let fusion_train = stage_predictions(&subset(&split, &fusion_idx), &fit_counts, &v1, sem1)?;
    let validation = stage_predictions(&subset(&split, &split.indices(Partition::Validation)), &fit_counts, &v1, sem1)?;
    let test = stage_predictions(&subset(&split, &split.indices(Partition::Test)), &counts, &v3, sem3)?;
    let two_level_tail = match d.profile.boundary(&counts) {
        crate::longtail::HeadTailBoundary::Explicit(v) => Some(v),
        _ => None,
    };
    let prepared = PreparedData { counts, fit_counts, fusion_train, validation, test, two_level_tail };
    Ok((split, prepared))
}

/// Tail membership of a two-level count vector: classes at the lower of
/// exactly two distinct levels. `None` for any other shape.
pub fn two_level_membership(counts: &ClassCounts) -> Option<Vec<bool>> {
    let (lo, hi) = (counts.min(), counts.max());
    if lo == hi || counts.as_slice().iter().any(|&n| n != lo && n != hi) {
        return None;
    }
    Some(counts.as_slice().iter().map(|&n| n == lo).collect())
}

/// Evaluated fusion rules.
#[derive(Debug, Clone, Copy)]
pub struct Trained<'a> {
    pub dragon: (&'a FusionModel, &'a FusionParams),
    pub per_class: Option<(&'a FusionModel, &'a FusionParams)>,
    pub gate: Option<&'a MixtureGate>,
}

fn baseline_rows(data: &StagePredictions, mode: BaselineMode, gate: Option<&MixtureGate>) -> Result<Vec<Vec<f64>>> {
    let s = data.semantic.as_ref().ok_or(Error::Empty("semantic predictions"))?;
    (0..data.len())
        .map(|r| {
            let g = match (gate, &data.features) {
                (Some(g), Some(f)) => Some((g, f[r].as_slice())),
                _ => None,
            };
            fusion_baselines(data.visual.row(r), s.row(r), mode, g)
        })
        .collect()
}

fn fusion_rows(data: &StagePredictions, (model, params): (&FusionModel, &FusionParams)) -> Result<Vec<Vec<f64>>> {
    model.scores(params, &data.data(model.config().single_modality)?)
}

/// Metrics of every applicable method on `data`: the single experts, the
/// fixed fusion rules, the mixture (when a gate is given), the fusion module
/// and its per-class ablation.
pub fn evaluate_methods(
    data: &StagePredictions,
    counts: &ClassCounts,
    opts: &EvalOptions,
    trained: Trained<'_>,
) -> Result<Vec<MethodResult>> {
    let truth = data.labels();
    let mut rows: Vec<(&str, Vec<Vec<f64>>)> = Vec::new();
    rows.push(("visual", data.visual.rows().map(<[f64]>::to_vec).collect()));
    let single = trained.dragon.0.config().single_modality;
    if let Some(s) = data.semantic.as_ref().filter(|_| !single) {
        rows.push(("semantic", s.rows().map(<[f64]>::to_vec).collect()));
        rows.push(("max", baseline_rows(data, BaselineMode::Max, None)?));
        rows.push(("avg", baseline_rows(data, BaselineMode::Avg, None)?));
        rows.push(("product", baseline_rows(data, BaselineMode::Product, None)?));
        if let (Some(g), Some(_)) = (trained.gate, &data.features) {
            rows.push(("mixture", baseline_rows(data, BaselineMode::Mixture, Some(g))?));
        }
    }
    rows.push((if single { "smdragon" } else { "dragon" }, fusion_rows(data, trained.dragon)?));
    if let Some(pc) = trained.per_class {
        rows.push(("per-class-ablation", fusion_rows(data, pc)?));
    }
    rows.into_iter()
        .map(|(name, r)| {
            let report = evaluate(&r, truth, counts, opts)?;
            Ok(MethodResult { method: name.into(), metrics: MetricsSummary::from(&report) })
        })
        .collect()
}

/// Training context of stage 2: stage-1 predictions on the fusion training
/// and validation sets, with the fit options of `config`.
pub fn grid_context<'a>(config: &ExperimentConfig, prepared: &'a PreparedData) -> Result<GridContext<'a>> {
    config.validate()?;
    let single = config.scenario == Scenario::VisionOnly;
    let counts = &prepared.counts;
    if prepared.fusion_train.is_empty() {
        return Err(Error::Empty("fusion training set"));
    }
    let train = prepared.fusion_train.data(single)?;
    let val = prepared.validation.data(single)?;
    for d in [&train, &val] {
        if d.visual.k() != counts.k() {
            return Err(Error::Dimension { context: "expert predictions", expected: counts.k(), actual: d.visual.k() });
        }
    }
    let class_weights = if config.balanced_loss {
        let n = ClassCounts::from_labels(train.labels.iter().copied(), counts.k())?;
        Some(balanced_class_weights(n.as_slice())?)
    } else {
        None
    };
    Ok(GridContext {
        counts,
        train,
        val,
        fit: FitOptions {
            max_epochs: config.max_epochs,
            patience: config.patience,
            batch_size: config.batch_size,
            seed: derive_seed(config.seed, salt::GRID),
            metric: config.metric(),
            class_weights,
        },
    })
}

/// Stage 2 alone: the exhaustive grid over per-sample configurations.
pub fn search<F>(config: &ExperimentConfig, prepared: &PreparedData, runner: F) -> Result<GridOutcome>
where
    F: Fn(&GridContext<'_>, &[FusionConfig]) -> Result<Vec<(LeaderboardEntry, FitResult)>>,
{
    let ctx = grid_context(config, prepared)?;
    let single = config.scenario == Scenario::VisionOnly;
    let points = grid_points(&config.grid, config.large_scale, single, Weighting::PerSample);
    let results = runner(&ctx, &points)?;
    if results.len() != points.len() {
        return Err(Error::Dimension { context: "grid results", expected: points.len(), actual: results.len() });
    }
    GridOutcome::from_results(results)
}

/// Stage 2 and evaluation on prepared predictions. `runner` trains the grid
/// points (serially or in parallel); it must return one result per point.
pub fn run_protocol<F>(config: &ExperimentConfig, prepared: &PreparedData, runner: F) -> Result<TrainReport>
where
    F: Fn(&GridContext<'_>, &[FusionConfig]) -> Result<Vec<(LeaderboardEntry, FitResult)>>,
{
    let GridOutcome { best, best_fit, leaderboard } = search(config, prepared, runner)?;
    let ctx = grid_context(config, prepared)?;
    let single = config.scenario == Scenario::VisionOnly;
    let metric = config.metric();
    let counts = &prepared.counts;
    let dragon_model = FusionModel::new(best.config, counts)?;

    let pc_config = FusionConfig { weighting: Weighting::PerClass, ..best.config };
    let (_, pc_fit) = run_grid_point(&ctx, best.index, pc_config)?;
    let pc_model = FusionModel::new(pc_config, counts)?;

    let gate = match (&prepared.fusion_train.features, &prepared.fusion_train.semantic) {
        (Some(f), Some(s)) if !single => Some(train_mixture_gate(
            f,
            &prepared.fusion_train.visual,
            s,
            &GateTraining { seed: derive_seed(config.seed, salt::GRID ^ 0xff), ..GateTraining::default() },
        )?),
        _ => None,
    };

    let trained = Trained {
        dragon: (&dragon_model, &best_fit.params),
        per_class: Some((&pc_model, &pc_fit.params)),
        gate: gate.as_ref(),
    };
    let opts = EvalOptions { num_bins: config.num_bins, two_level_tail: prepared.two_level_tail.clone(), ..Default::default() };
    let validation = evaluate_methods(&prepared.validation, counts, &opts, trained)?;
    let test = evaluate_methods(&prepared.test, counts, &opts, trained)?;
    Ok(TrainReport {
        scenario: config.scenario,
        selection_metric: metric,
        large_scale: config.large_scale,
        k: counts.k(),
        counts: counts.clone(),
        sizes: SetSizes {
            fit: prepared.fit_counts.total(),
            fusion_train: prepared.fusion_train.len(),
            validation: prepared.validation.len(),
            test: prepared.test.len(),
        },
        best_config: best.config,
        n_params: best.n_params,
        params: best_fit.params.values,
        history: best_fit.history,
        selected_epoch: best_fit.selected_epoch,
        stopped_epoch: best_fit.stopped_epoch,
        best_val_metric: best_fit.best_metric,
        leaderboard,
        per_class_config: pc_config,
        per_class_params: pc_fit.params.values,
        mixture_gate: gate,
        validation,
        test,
    })
}

/// Serial grid runner.
pub fn serial_runner(ctx: &GridContext<'_>, points: &[FusionConfig]) -> Result<Vec<(LeaderboardEntry, FitResult)>> {
    points.iter().enumerate().map(|(i, c)| run_grid_point(ctx, i, *c)).collect()
}

/// The full protocol on the synthetic task: fit experts without the
/// hold-out, train the fusion module on it, refit experts on all training
/// data and evaluate.
pub fn three_stage_train(config: &ExperimentConfig) -> Result<TrainReport> {
    let (_, prepared) = prepare_synthetic(config)?;
    run_protocol(config, &prepared, serial_runner)
}
