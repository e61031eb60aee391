//! Subcommands. Each one writes its artifacts, then a run manifest listing
//! them with their hashes; `replay` re-runs a manifest and compares.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltfuse_core::experts::{bias_report, simulate_expert, ExpertProfile, PredictionMatrix};
use ltfuse_core::fusion::{fusion_baselines, BaselineMode, FusionData};
use ltfuse_core::longtail::{
    draw_split, holdout_split, synthetic_task, FrequencyProfile, Partition, SplitOptions, SyntheticTaskConfig,
};
use ltfuse_core::metrics::{acc_h, evaluate, percent, EvalOptions, MetricsReport};
use ltfuse_core::rng::{derive_seed, salt};
use ltfuse_core::training::{run_protocol, search, two_level_membership, ExperimentConfig, MethodResult};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::{
    class_confidence, load_config, load_counts, load_features, load_labels, load_predictions, load_split,
    save_class_confidence, save_confusion, save_counts, save_json, save_predictions, save_reliability, save_split,
    Checkpoint, FusionBlocks, CHECKPOINT_VERSION,
};
use crate::manifest::{Artifact, RunManifest};
use crate::runner::{parallel_runner, prepare, with_threads};

#[derive(Debug, Parser)]
#[command(name = "ltfuse", version, about = "Late fusion of two expert classifiers on long-tailed data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic long-tailed split (manifest, features, counts).
    GenData(GenDataArgs),
    /// Simulate a familiarity-biased expert on a split and write its predictions.
    Simulate(SimulateArgs),
    /// Run the three-stage protocol from a config; writes report, checkpoint, manifest.
    Train(TrainArgs),
    /// Run only the grid search; writes leaderboard, checkpoint, manifest.
    Gridsearch(TrainArgs),
    /// Evaluate a fusion rule on prediction files.
    Eval(EvalArgs),
    /// Harmonic mean of many-shot and few-shot accuracy (percent in, percent out).
    AccH(AccHArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    Exp,
    TwoLevel,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    /// Class-frequency profile.
    #[arg(long, value_enum)]
    pub profile: ProfileKind,
    /// Number of classes (exp).
    #[arg(long)]
    pub k: Option<usize>,
    /// Count of the most frequent class (exp).
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Count of the rarest class (exp).
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Number of head classes (two-level).
    #[arg(long)]
    pub k_head: Option<usize>,
    /// Samples per head class (two-level).
    #[arg(long)]
    pub n_head: Option<usize>,
    /// Number of tail classes (two-level).
    #[arg(long)]
    pub k_tail: Option<usize>,
    /// Samples per tail class (two-level).
    #[arg(long)]
    pub shots: Option<usize>,
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Radius of the sphere holding the class means.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Samples per class beyond the training count (validation + test).
    #[arg(long, default_value_t = 20)]
    pub eval_reserve: usize,
    /// Validation size as a fraction of the training size.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Hold-out fraction of tail classes.
    #[arg(long, default_value_t = 0.5)]
    pub holdout_tail: f64,
    /// Hold-out fraction of head classes.
    #[arg(long, default_value_t = 0.2)]
    pub holdout_head: f64,
    #[arg(long, env = "LTFUSE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpertChoice {
    Visual,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionChoice {
    Train,
    Holdout,
    Validation,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitSet {
    /// Train and hold-out samples (stage 3).
    All,
    /// Train samples without the hold-out (stage 1).
    Fit,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Split manifest written by gen-data.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, value_enum)]
    pub profile: ExpertChoice,
    /// Expert seed; defaults to 1 (visual) or 2 (semantic).
    #[arg(long, env = "LTFUSE_SEED")]
    pub seed: Option<u64>,
    /// Samples to predict.
    #[arg(long, value_enum, default_value = "test")]
    pub partition: PartitionChoice,
    /// Training data the expert is fit on.
    #[arg(long, value_enum, default_value = "all")]
    pub fit_set: FitSet,
    /// Prediction CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "ltfuse-out")]
    pub out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long, env = "LTFUSE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for the grid search (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Visual,
    Semantic,
    Dragon,
    Smdragon,
    Max,
    Avg,
    Product,
    Mixture,
    PerClassAblation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricSet {
    SmoothTail,
    TwoLevel,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Fusion checkpoint (dragon, smdragon, per-class-ablation, mixture).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Visual expert predictions.
    #[arg(long)]
    pub preds_v: PathBuf,
    /// Semantic expert predictions.
    #[arg(long)]
    pub preds_s: Option<PathBuf>,
    /// Training counts: split manifest (.json) or `class,count` CSV.
    #[arg(long)]
    pub counts: PathBuf,
    /// `sample_id,label` CSV; must match the prediction rows.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Feature CSV for the mixture gate (`sample_id,label,x_*`).
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dragon")]
    pub mode: EvalMode,
    #[arg(long, value_enum, default_value = "smooth-tail")]
    pub metric_set: MetricSet,
    #[arg(long, default_value_t = 10)]
    pub num_bins: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AccHArgs {
    /// Many-shot accuracy, percent.
    #[arg(long, allow_negative_numbers = true)]
    pub ms: f64,
    /// Few-shot accuracy, percent.
    #[arg(long, allow_negative_numbers = true)]
    pub fs: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Compare every re-written artifact with the recorded hash.
    #[arg(long)]
    pub verify: bool,
}

/// Seed and config recorded by an earlier run, forced during replay.
#[derive(Debug, Clone, Default)]
struct Forced {
    seed: Option<u64>,
    config: Option<serde_json::Value>,
}

struct Outcome {
    manifest: PathBuf,
    artifacts: Vec<PathBuf>,
    seed: Option<u64>,
    config: Option<serde_json::Value>,
}

/// Parses `argv` (without the program name) and runs it. Returns the process
/// exit code; clap prints help, version and usage errors itself.
pub fn main_with(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(std::iter::once("ltfuse".to_string()).chain(argv.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, argv: &[String]) -> Result<()> {
    match cmd {
        Command::AccH(a) => acc_h_cmd(&a),
        Command::Replay(a) => replay(&a),
        cmd => {
            run_recorded(cmd, argv, Forced::default())?;
            Ok(())
        }
    }
}

fn run_recorded(cmd: Command, argv: &[String], forced: Forced) -> Result<RunManifest> {
    let start = Instant::now();
    let name = command_name(&cmd);
    let out = match cmd {
        Command::GenData(a) => gen_data(a, forced)?,
        Command::Simulate(a) => simulate(a, forced)?,
        Command::Train(a) => train(a, forced, false)?,
        Command::Gridsearch(a) => train(a, forced, true)?,
        Command::Eval(a) => eval(&a)?,
        Command::AccH(_) | Command::Replay(_) => return Err(Error::Usage(format!("{name} cannot be recorded"))),
    };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        args: argv.to_vec(),
        seed: out.seed,
        config: out.config,
        artifacts: out.artifacts.iter().map(|p| Artifact::of(p)).collect::<Result<_>>()?,
        duration_ms: start.elapsed().as_millis() as u64,
    };
    manifest.write_atomic(&out.manifest)?;
    Ok(manifest)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::GenData(_) => "gen-data",
        Command::Simulate(_) => "simulate",
        Command::Train(_) => "train",
        Command::Gridsearch(_) => "gridsearch",
        Command::Eval(_) => "eval",
        Command::AccH(_) => "acc-h",
        Command::Replay(_) => "replay",
    }
}

fn need(v: Option<usize>, flag: &str, profile: &str) -> Result<usize> {
    v.ok_or_else(|| Error::Usage(format!("--profile {profile} requires --{flag}")))
}

fn frequency_profile(a: &GenDataArgs) -> Result<FrequencyProfile> {
    let exp_flags = [("k", a.k), ("n-max", a.n_max), ("n-min", a.n_min)];
    let two_flags = [("k-head", a.k_head), ("n-head", a.n_head), ("k-tail", a.k_tail), ("shots", a.shots)];
    let (own, other, name) = match a.profile {
        ProfileKind::Exp => (&exp_flags[..], &two_flags[..], "exp"),
        ProfileKind::TwoLevel => (&two_flags[..], &exp_flags[..], "two-level"),
    };
    if let Some((flag, _)) = other.iter().find(|(_, v)| v.is_some()) {
        return Err(Error::Usage(format!("--{flag} does not apply to --profile {name}")));
    }
    let v: Vec<usize> = own.iter().map(|(f, v)| need(*v, f, name)).collect::<Result<_>>()?;
    let p = match a.profile {
        ProfileKind::Exp => FrequencyProfile::Exponential { k: v[0], n_max: v[1], n_min: v[2], rank_order: None },
        ProfileKind::TwoLevel => FrequencyProfile::TwoLevel { k_head: v[0], n_head: v[1], k_tail: v[2], shots: v[3] },
    };
    p.counts().map_err(|e| Error::Usage(format!("--profile {name}: {e}")))?;
    Ok(p)
}

fn gen_data(a: GenDataArgs, forced: Forced) -> Result<Outcome> {
    let seed = forced.seed.unwrap_or(a.seed);
    let profile = frequency_profile(&a)?;
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(Error::Usage("--val-fraction must lie in [0, 1)".into()));
    }
    for (flag, f) in [("holdout-tail", a.holdout_tail), ("holdout-head", a.holdout_head)] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Usage(format!("--{flag} must lie in [0, 1)")));
        }
    }
    if a.dim == 0 || !(a.separation > 0.0) {
        return Err(Error::Usage("--dim must be >= 1 and --separation positive".into()));
    }
    let requested = profile.counts()?;
    let task = SyntheticTaskConfig {
        dim: a.dim,
        separation: a.separation,
        eval_reserve: a.eval_reserve,
        seed: derive_seed(seed, salt::TASK),
    };
    let pool = synthetic_task(&requested, &task)?;
    let mut split = draw_split(&pool, &requested, &SplitOptions::new(a.val_fraction, seed), Some(profile.clone()))?;
    let counts = split.train_counts();
    let hs = holdout_split(&split, a.holdout_tail, a.holdout_head, &profile.boundary(&counts), seed)?;
    split.apply_holdout(&hs);

    let manifest_path = a.out.join("split.json");
    let counts_path = a.out.join("counts.csv");
    save_split(&split, &manifest_path, "features.csv")?;
    save_counts(&counts, &counts_path)?;
    println!(
        "classes {}  train {}  Max {}  Min {}  Mean {:.1}  Median {}",
        counts.k(),
        counts.total(),
        counts.max(),
        counts.min(),
        counts.mean(),
        counts.median()
    );
    let sizes: Vec<String> =
        Partition::ALL.iter().map(|&p| format!("{} {}", p.name(), split.indices(p).len())).collect();
    println!("{}", sizes.join("  "));
    Ok(Outcome {
        manifest: a.out.join("manifest.json"),
        artifacts: vec![manifest_path, a.out.join("features.csv"), counts_path],
        seed: Some(seed),
        config: None,
    })
}

fn simulate(a: SimulateArgs, forced: Forced) -> Result<Outcome> {
    let split = load_split(&a.split)?;
    let seed = forced.seed.or(a.seed).unwrap_or(match a.profile {
        ExpertChoice::Visual => 1,
        ExpertChoice::Semantic => 2,
    });
    let profile = match a.profile {
        ExpertChoice::Visual => ExpertProfile::visual(seed),
        ExpertChoice::Semantic => ExpertProfile::semantic(seed),
    };
    let counts = match a.fit_set {
        FitSet::All => split.train_counts(),
        FitSet::Fit => split.counts_of(&split.indices(Partition::Train)),
    };
    let idx = match a.partition {
        PartitionChoice::All => (0..split.samples.len()).collect(),
        PartitionChoice::Train => split.indices(Partition::Train),
        PartitionChoice::Holdout => split.indices(Partition::Holdout),
        PartitionChoice::Validation => split.indices(Partition::Validation),
        PartitionChoice::Test => split.indices(Partition::Test),
    };
    let samples: Vec<_> = idx.iter().map(|&i| split.samples[i].clone()).collect();
    let preds = simulate_expert(&samples, &counts, &profile)?;
    save_predictions(&preds, &a.out)?;
    let bias = bias_report(&preds, preds.labels(), &counts)?;
    let acc = preds.argmax_predictions().iter().zip(preds.labels()).filter(|(p, y)| p == y).count() as f64
        / preds.n().max(1) as f64;
    println!("samples {}  accuracy {}  spearman {:.3}", preds.n(), percent(acc), bias.spearman);
    let mut manifest = a.out.clone().into_os_string();
    manifest.push(".manifest.json");
    Ok(Outcome { manifest: manifest.into(), artifacts: vec![a.out], seed: Some(seed), config: None })
}

fn resolve_config(a: &TrainArgs, forced: &Forced) -> Result<ExperimentConfig> {
    if let Some(v) = &forced.config {
        let cfg: ExperimentConfig =
            serde_json::from_value(v.clone()).map_err(|e| Error::Data(format!("recorded config: {e}")))?;
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn train(a: TrainArgs, forced: Forced, grid_only: bool) -> Result<Outcome> {
    let cfg = resolve_config(&a, &forced)?;
    let prepared = prepare(&cfg)?;
    let ckpt_path = a.out_dir.join("checkpoint.json");
    let main_path;
    if grid_only {
        let outcome = with_threads(a.threads, || search(&cfg, &prepared, parallel_runner))??;
        main_path = a.out_dir.join("leaderboard.json");
        save_json(&outcome.leaderboard, &main_path)?;
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            k: prepared.counts.k(),
            counts: prepared.counts.as_slice().to_vec(),
            variant: if outcome.best.config.single_modality { "smdragon" } else { "dragon" }.into(),
            fusion: FusionBlocks::from_params(outcome.best.config, &outcome.best_fit.params),
            per_class: None,
            mixture_gate: None,
        };
        ckpt.save(&ckpt_path)?;
        println!("{:>4}  {:>8}  {:>6}  {:>2}  {:>2}  {:>7}  {:>5}", "rank", "val", "params", "d", "F", "lr", "beta");
        for (r, e) in outcome.leaderboard.iter().take(10).enumerate() {
            println!(
                "{:>4}  {:>8}  {:>6}  {:>2}  {:>2}  {:>7.0e}  {:>5}",
                r + 1,
                percent(e.val_metric),
                e.n_params,
                e.config.degree,
                e.config.filters,
                e.config.learning_rate,
                e.config.beta
            );
        }
    } else {
        let report = with_threads(a.threads, || run_protocol(&cfg, &prepared, parallel_runner))??;
        main_path = a.out_dir.join("report.json");
        save_json(&report, &main_path)?;
        Checkpoint::from_report(&report)?.save(&ckpt_path)?;
        let c = report.best_config;
        println!(
            "selected d={} F={} lr={:e} beta={} l2={:e} at epoch {} ({} params)",
            c.degree, c.filters, c.learning_rate, c.beta, c.l2, report.selected_epoch, report.n_params
        );
        print_methods("validation", &report.validation);
        print_methods("test", &report.test);
    }
    let config = serde_json::to_value(&cfg).map_err(|e| Error::Data(e.to_string()))?;
    Ok(Outcome {
        manifest: a.out_dir.join("manifest.json"),
        artifacts: vec![main_path, ckpt_path],
        seed: Some(cfg.seed),
        config: Some(config),
    })
}

fn pct(x: Option<f64>) -> String {
    x.map(percent).unwrap_or_else(|| "-".into())
}

fn print_methods(set: &str, rows: &[MethodResult]) {
    println!("{set}:");
    println!("  {:<20} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}", "method", "Acc_PC", "Acc_LT", "many", "medium", "few", "Acc_H");
    for r in rows {
        let m = &r.metrics;
        println!(
            "  {:<20} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            r.method,
            percent(m.acc_pc),
            pct(m.acc_lt),
            pct(m.buckets.many),
            pct(m.buckets.medium),
            pct(m.buckets.few),
            pct(m.acc_h)
        );
    }
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    mode: String,
    metric_set: String,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn aligned(v: &PredictionMatrix, s: &PredictionMatrix, a: &EvalArgs) -> Result<()> {
    v.check_aligned(s).map_err(|e| {
        let sp = a.preds_s.as_deref().unwrap_or(Path::new(""));
        Error::Data(format!("{} vs {}: {e}", a.preds_v.display(), sp.display()))
    })
}

fn eval(a: &EvalArgs) -> Result<Outcome> {
    if a.num_bins == 0 {
        return Err(Error::Usage("--num-bins must be >= 1".into()));
    }
    let counts = load_counts(&a.counts)?;
    let v = load_predictions(&a.preds_v)?;
    let s = a.preds_s.as_deref().map(load_predictions).transpose()?;
    if let Some(s) = &s {
        aligned(&v, s, a)?;
    }
    if v.k() != counts.k() {
        return Err(Error::Data(format!("predictions have k={} but counts have k={}", v.k(), counts.k())));
    }
    if let Some(p) = &a.labels {
        let labels = load_labels(p)?;
        let rows: Vec<(u64, usize)> = v.ids().iter().copied().zip(v.labels().iter().copied()).collect();
        if labels.len() != rows.len() {
            return Err(Error::in_file(p, format!("{} labels for {} prediction rows", labels.len(), rows.len())));
        }
        if let Some(i) = (0..rows.len()).find(|&i| labels[i] != rows[i]) {
            return Err(Error::in_file(
                p,
                format!("row {i}: ({}, {}) does not match prediction row ({}, {})", labels[i].0, labels[i].1, rows[i].0, rows[i].1),
            ));
        }
    }
    let need_s = || {
        s.as_ref().ok_or_else(|| Error::Usage(format!("--mode {} requires --preds-s", value_name(a.mode))))
    };
    let ckpt = || -> Result<Checkpoint> {
        let p = a
            .checkpoint
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("--mode {} requires --checkpoint", value_name(a.mode))))?;
        let c = Checkpoint::load(p)?;
        if c.k != counts.k() {
            return Err(Error::in_file(p, format!("checkpoint has k={} but counts have k={}", c.k, counts.k())));
        }
        Ok(c)
    };
    let baseline = |mode: BaselineMode| -> Result<Vec<Vec<f64>>> {
        let s = need_s()?;
        (0..v.n()).map(|r| Ok(fusion_baselines(v.row(r), s.row(r), mode, None)?)).collect()
    };
    let rows: Vec<Vec<f64>> = match a.mode {
        EvalMode::Visual => v.rows().map(<[f64]>::to_vec).collect(),
        EvalMode::Semantic => need_s()?.rows().map(<[f64]>::to_vec).collect(),
        EvalMode::Max => baseline(BaselineMode::Max)?,
        EvalMode::Avg => baseline(BaselineMode::Avg)?,
        EvalMode::Product => baseline(BaselineMode::Product)?,
        EvalMode::Mixture => {
            let s = need_s()?;
            let c = ckpt()?;
            let gate = c.mixture_gate.ok_or_else(|| Error::Data("checkpoint has no mixture gate".into()))?;
            let fp = a.features.as_deref().ok_or_else(|| Error::Usage("--mode mixture requires --features".into()))?;
            let feats = load_features(fp)?;
            (0..v.n())
                .map(|r| {
                    let id = v.ids()[r];
                    let (_, x) = feats.get(&id).ok_or_else(|| Error::in_file(fp, format!("no features for sample {id}")))?;
                    Ok(fusion_baselines(v.row(r), s.row(r), BaselineMode::Mixture, Some((&gate, x)))?)
                })
                .collect::<Result<_>>()?
        }
        EvalMode::Dragon | EvalMode::Smdragon | EvalMode::PerClassAblation => {
            let c = ckpt()?;
            let model_counts = ltfuse_core::longtail::ClassCounts::new(c.counts.clone())?;
            let blocks = match a.mode {
                EvalMode::PerClassAblation => {
                    c.per_class.as_ref().ok_or_else(|| Error::Data("checkpoint has no per-class ablation".into()))?
                }
                _ => &c.fusion,
            };
            let (model, params) = blocks.restore(&model_counts).map_err(Error::Data)?;
            let single = model.config().single_modality;
            match (a.mode, single) {
                (EvalMode::Dragon, true) => return Err(Error::Usage("checkpoint is smdragon; use --mode smdragon".into())),
                (EvalMode::Smdragon, false) => return Err(Error::Usage("checkpoint is dragon; use --mode dragon".into())),
                _ => {}
            }
            let data = if single { FusionData::new(&v, None)? } else { FusionData::new(&v, Some(need_s()?))? };
            model.scores(&params, &data)?
        }
    };
    let two_level_tail = match a.metric_set {
        MetricSet::SmoothTail => None,
        MetricSet::TwoLevel => Some(
            two_level_membership(&counts)
                .ok_or_else(|| Error::Data("two-level metrics need counts with exactly two levels".into()))?,
        ),
    };
    let opts = EvalOptions { num_bins: a.num_bins, two_level_tail, ..Default::default() };
    let report = evaluate(&rows, v.labels(), &counts, &opts)?;

    let metrics_path = a.out.join("metrics.json");
    let rel_path = a.out.join("reliability.csv");
    let conf_path = a.out.join("confusion.csv");
    let cc_path = a.out.join("class_confidence.csv");
    let out = EvalOutput { mode: value_name(a.mode), metric_set: value_name(a.metric_set), report: &report };
    save_json(&out, &metrics_path)?;
    save_reliability(&report.reliability, &rel_path)?;
    save_confusion(&report.confusion, &conf_path)?;
    save_class_confidence(&class_confidence(&rows, v.labels(), &counts), &cc_path)?;
    println!(
        "{}  n {}  Acc_PC {}  Acc_LT {}  many {}  medium {}  few {}  Acc_H {}  ECE {}",
        out.mode,
        report.n,
        percent(report.acc_pc),
        pct(report.acc_lt),
        pct(report.buckets.many),
        pct(report.buckets.medium),
        pct(report.buckets.few),
        pct(report.acc_h),
        percent(report.ece)
    );
    Ok(Outcome {
        manifest: a.out.join("manifest.json"),
        artifacts: vec![metrics_path, rel_path, conf_path, cc_path],
        seed: None,
        config: None,
    })
}

fn acc_h_cmd(a: &AccHArgs) -> Result<()> {
    for (flag, x) in [("ms", a.ms), ("fs", a.fs)] {
        if !(0.0..=100.0).contains(&x) {
            return Err(Error::Usage(format!("--{flag} must be a percentage in [0, 100]")));
        }
    }
    println!("acc_h {:.1}", acc_h(a.ms, a.fs));
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    let cli = Cli::try_parse_from(std::iter::once("ltfuse".to_string()).chain(recorded.args.iter().cloned()))
        .map_err(|e| Error::Data(format!("{}: recorded args do not parse: {e}", a.manifest.display())))?;
    if matches!(cli.command, Command::Replay(_) | Command::AccH(_)) {
        return Err(Error::Data(format!("{}: {} runs are not replayable", a.manifest.display(), recorded.command)));
    }
    let forced = Forced { seed: recorded.seed, config: recorded.config.clone() };
    let rerun = run_recorded(cli.command, &recorded.args, forced)?;
    if a.verify {
        let differing: Vec<&str> = recorded
            .artifacts
            .iter()
            .filter(|old| !rerun.artifacts.iter().any(|new| new == *old))
            .map(|old| old.path.as_str())
            .collect();
        if !differing.is_empty() {
            return Err(Error::Data(format!("replay differs: {}", differing.join(", "))));
        }
        println!("replayed {}: {} artifacts identical", recorded.command, recorded.artifacts.len());
    }
    Ok(())
}
