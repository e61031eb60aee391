//! Three-stage training protocol, grid search and early stopping.

mod fit;
mod grid;
mod pipeline;

pub use fit::{train_fusion, validation_metric, EpochRecord, FitOptions, FitResult};
pub use grid::{grid_points, grid_search, point_seed, rank, run_grid_point, GridContext, GridOutcome, LeaderboardEntry};
pub use pipeline::{
    grid_context, search, two_level_membership,
    evaluate_methods, prepare_synthetic, run_protocol, serial_runner, three_stage_train, MethodResult,
    MetricsSummary, PreparedData, SetSizes, StagePredictions, TrainReport, Trained,
};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::experts::ExpertProfile;
use crate::fusion::{SortBy, DEGREES, MAX_FILTERS};
use crate::longtail::FrequencyProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SmoothTail,
    TwoLevel,
    VisionOnly,
}

impl Scenario {
    /// Validation metric used for model selection in this scenario.
    pub fn selection_metric(self) -> SelectionMetric {
        match self {
            Scenario::TwoLevel => SelectionMetric::AccPc,
            Scenario::SmoothTail | Scenario::VisionOnly => SelectionMetric::AccLt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMetric {
    AccPc,
    AccLt,
}

/// Which samples the fusion module is fitted on in the small-scale path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionTrainSet {
    Holdout,
    HoldoutAndFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub profile: FrequencyProfile,
    pub dim: usize,
    pub separation: f64,
    /// Samples per class beyond the training count (validation + test).
    pub eval_reserve: usize,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertsConfig {
    pub visual: ExpertProfile,
    pub semantic: ExpertProfile,
}

impl Default for ExpertsConfig {
    fn default() -> Self {
        Self { visual: ExpertProfile::visual(1), semantic: ExpertProfile::semantic(2) }
    }
}

/// Prediction CSV paths of one sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertFiles {
    pub visual: String,
    #[serde(default)]
    pub semantic: Option<String>,
}

/// Precomputed expert predictions used instead of the synthetic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFiles {
    /// Training counts: a split manifest or a per-class count CSV.
    pub counts: String,
    /// Predictions of the stage-1 experts on the fusion training set.
    pub fusion_train: ExpertFiles,
    /// Predictions of the stage-1 experts on the validation set.
    pub validation: ExpertFiles,
    /// Predictions of the refit experts on the test set.
    pub test: ExpertFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub degrees: Vec<usize>,
    pub filters: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub betas: Vec<f64>,
    /// Only searched on the large-scale path; otherwise L2 is 0.
    #[serde(default = "default_l2s")]
    pub l2s: Vec<f64>,
    #[serde(default = "default_sort_by")]
    pub sort_by: Vec<SortBy>,
}

fn default_l2s() -> Vec<f64> {
    vec![1e-5, 1e-4, 1e-3]
}

fn default_sort_by() -> Vec<SortBy> {
    vec![SortBy::Visual]
}

impl Default for GridConfig {
    /// The full search space: filters 1..4, degree 2..4, three learning
    /// rates and β ∈ {−2, −1, 0, 1, 2}.
    fn default() -> Self {
        Self {
            degrees: DEGREES.to_vec(),
            filters: (1..=MAX_FILTERS).collect(),
            learning_rates: vec![1e-5, 1e-4, 1e-3],
            betas: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            l2s: default_l2s(),
            sort_by: default_sort_by(),
        }
    }
}

impl GridConfig {
    pub fn single(degree: usize, filters: usize, learning_rate: f64, beta: f64) -> Self {
        Self {
            degrees: vec![degree],
            filters: vec![filters],
            learning_rates: vec![learning_rate],
            betas: vec![beta],
            l2s: vec![0.0],
            sort_by: default_sort_by(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Synthetic task; exclusive with `prediction_files`.
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub experts: ExpertsConfig,
    #[serde(default)]
    pub prediction_files: Option<PredictionFiles>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub seed: u64,
    /// Skip the hold-out: fit experts and fusion on the full training set.
    #[serde(default)]
    pub large_scale: bool,
    #[serde(default = "default_train_set")]
    pub fusion_train_set: FusionTrainSet,
    #[serde(default)]
    pub balanced_loss: bool,
    #[serde(default = "default_tail_fraction")]
    pub holdout_tail_fraction: f64,
    #[serde(default = "default_head_fraction")]
    pub holdout_head_fraction: f64,
    /// Overrides the scenario's selection metric.
    #[serde(default)]
    pub selection_metric: Option<SelectionMetric>,
    #[serde(default = "default_bins")]
    pub num_bins: usize,
    /// Skip the learning-rate range check.
    #[serde(default)]
    pub allow_out_of_range_grid: bool,
}

fn default_epochs() -> usize {
    500
}
fn default_patience() -> usize {
    10
}
fn default_batch() -> usize {
    64
}
fn default_train_set() -> FusionTrainSet {
    FusionTrainSet::Holdout
}
fn default_tail_fraction() -> f64 {
    0.5
}
fn default_head_fraction() -> f64 {
    0.2
}
fn default_bins() -> usize {
    10
}

impl ExperimentConfig {
    pub fn metric(&self) -> SelectionMetric {
        self.selection_metric.unwrap_or_else(|| self.scenario.selection_metric())
    }

    /// Every schema violation, each prefixed with its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let g = &self.grid;
        for (name, len) in [
            ("grid.degrees", g.degrees.len()),
            ("grid.filters", g.filters.len()),
            ("grid.learning_rates", g.learning_rates.len()),
            ("grid.betas", g.betas.len()),
            ("grid.sort_by", g.sort_by.len()),
        ] {
            if len == 0 {
                v.push(format!("{name}: must not be empty"));
            }
        }
        if self.large_scale && g.l2s.is_empty() {
            v.push("grid.l2s: must not be empty on the large-scale path".into());
        }
        for (i, d) in g.degrees.iter().enumerate() {
            if !DEGREES.contains(d) {
                v.push(format!("grid.degrees[{i}]: {d} not in {{2, 3, 4}}"));
            }
        }
        for (i, f) in g.filters.iter().enumerate() {
            if !(1..=MAX_FILTERS).contains(f) {
                v.push(format!("grid.filters[{i}]: {f} not in 1..=4"));
            }
        }
        for (i, b) in g.betas.iter().enumerate() {
            if !(-2.0..=2.0).contains(b) {
                v.push(format!("grid.betas[{i}]: {b} outside [-2, 2]"));
            }
        }
        for (i, lr) in g.learning_rates.iter().enumerate() {
            if !(*lr > 0.0) {
                v.push(format!("grid.learning_rates[{i}]: must be positive"));
            } else if !self.allow_out_of_range_grid && !(1e-5..=1e-3).contains(lr) {
                v.push(format!("grid.learning_rates[{i}]: {lr} outside [1e-5, 1e-3]"));
            }
        }
        for (i, l2) in g.l2s.iter().enumerate() {
            if !(*l2 >= 0.0) {
                v.push(format!("grid.l2s[{i}]: must be >= 0"));
            }
        }
        if self.scenario == Scenario::VisionOnly && g.sort_by.iter().any(|s| *s != SortBy::Visual) {
            v.push("grid.sort_by: vision-only fusion can only sort by the visual expert".into());
        }
        if self.patience == 0 {
            v.push("patience: must be >= 1".into());
        }
        if self.batch_size == 0 {
            v.push("batch_size: must be >= 1".into());
        }
        if self.num_bins == 0 {
            v.push("num_bins: must be >= 1".into());
        }
        match (&self.data, &self.prediction_files) {
            (None, None) => v.push("data: required unless prediction_files is given".into()),
            (Some(_), Some(_)) => v.push("prediction_files: conflicts with data".into()),
            (None, Some(f)) => {
                if self.scenario != Scenario::VisionOnly {
                    for (name, e) in [("fusion_train", &f.fusion_train), ("validation", &f.validation), ("test", &f.test)] {
                        if e.semantic.is_none() {
                            v.push(format!("prediction_files.{name}.semantic: required outside the vision-only scenario"));
                        }
                    }
                }
            }
            (Some(d), None) => {
                if !(0.0..1.0).contains(&d.val_fraction) {
                    v.push("data.val_fraction: must lie in [0, 1)".into());
                }
                if !(d.separation > 0.0) {
                    v.push("data.separation: must be positive".into());
                }
                if d.dim == 0 {
                    v.push("data.dim: must be >= 1".into());
                }
                if d.profile.k() < 2 {
                    v.push("data.profile: needs at least 2 classes".into());
                }
            }
        }
        for (name, f) in [
            ("holdout_tail_fraction", self.holdout_tail_fraction),
            ("holdout_head_fraction", self.holdout_head_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                v.push(format!("{name}: must lie in [0, 1)"));
            }
        }
        for (name, p) in [("experts.visual", &self.experts.visual), ("experts.semantic", &self.experts.semantic)] {
            if let Err(e) = p.validate() {
                v.push(format!("{name}: {e}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Outcome of early stopping over a metric stream (positions are 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub selected: usize,
    pub stopped: usize,
}

/// Tracks the best value of a validation stream and signals a stop after
/// `patience` consecutive observations without strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_at: usize,
    seen: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self { patience: patience.max(1), best: f64::NEG_INFINITY, best_at: 0, seen: 0 }
    }

    /// Records the next value; returns `true` when training should stop.
    pub fn observe(&mut self, value: f64) -> bool {
        self.seen += 1;
        if value > self.best {
            self.best = value;
            self.best_at = self.seen;
        }
        self.seen - self.best_at >= self.patience
    }

    pub fn is_best(&self) -> bool {
        self.best_at == self.seen
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_position(&self) -> usize {
        self.best_at
    }

    pub fn position(&self) -> usize {
        self.seen
    }
}

/// Runs [`EarlyStopper`] over a finite stream.
pub fn early_stop(stream: &[f64], patience: usize) -> Result<EarlyStop> {
    if patience == 0 {
        return Err(Error::InvalidInput("patience must be >= 1".into()));
    }
    if stream.is_empty() {
        return Err(Error::Empty("metric stream"));
    }
    let mut s = EarlyStopper::new(patience);
    for &v in stream {
        if s.observe(v) {
            break;
        }
    }
    Ok(EarlyStop { selected: s.best_position(), stopped: s.position() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_examples() {
        let up: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(early_stop(&up, 3).unwrap(), EarlyStop { selected: 30, stopped: 30 });
        let flat = [0.4; 30];
        assert_eq!(early_stop(&flat, 5).unwrap(), EarlyStop { selected: 1, stopped: 6 });
        let s = early_stop(&[0.5, 0.7, 0.6, 0.6, 0.6], 2).unwrap();
        assert_eq!(s, EarlyStop { selected: 2, stopped: 4 });
        assert!(early_stop(&[0.1], 0).is_err());
    }

    #[test]
    fn default_grid_matches_search_space() {
        let g = GridConfig::default();
        assert_eq!(g.degrees, vec![2, 3, 4]);
        assert_eq!(g.filters, vec![1, 2, 3, 4]);
        assert_eq!(g.learning_rates, vec![1e-5, 1e-4, 1e-3]);
        assert_eq!(g.betas, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn scenario_metrics() {
        assert_eq!(Scenario::SmoothTail.selection_metric(), SelectionMetric::AccLt);
        assert_eq!(Scenario::VisionOnly.selection_metric(), SelectionMetric::AccLt);
        assert_eq!(Scenario::TwoLevel.selection_metric(), SelectionMetric::AccPc);
    }
}
