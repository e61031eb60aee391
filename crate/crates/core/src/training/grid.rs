use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fit::{train_fusion, FitOptions, FitResult};
use super::GridConfig;
use crate::fusion::{FusionConfig, FusionData, FusionModel, Weighting};
use crate::longtail::ClassCounts;
use crate::rng::{derive_seed, salt};
use crate::{Error, Result};

/// Everything a grid point needs besides its configuration.
#[derive(Debug, Clone)]
pub struct GridContext<'a> {
    pub counts: &'a ClassCounts,
    pub train: FusionData<'a>,
    pub val: FusionData<'a>,
    /// `seed` is the grid seed; each point derives its own.
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub index: usize,
    pub config: FusionConfig,
    pub seed: u64,
    pub n_params: usize,
    pub val_metric: f64,
    pub selected_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: LeaderboardEntry,
    pub best_fit: FitResult,
    /// Sorted by descending validation metric.
    pub leaderboard: Vec<LeaderboardEntry>,
}

/// Cartesian product of the grid, in a fixed order. L2 values are searched
/// only when `large_scale` is set.
pub fn grid_points(grid: &GridConfig, large_scale: bool, single_modality: bool, weighting: Weighting) -> Vec<FusionConfig> {
    let l2s: &[f64] = if large_scale { &grid.l2s } else { &[0.0] };
    let betas: &[f64] = if single_modality { &[0.0] } else { &grid.betas };
    let mut out = Vec::new();
    for &sort_by in &grid.sort_by {
        for &filters in &grid.filters {
            for &degree in &grid.degrees {
                for &learning_rate in &grid.learning_rates {
                    for &beta in betas {
                        for &l2 in l2s {
                            out.push(FusionConfig {
                                degree,
                                filters,
                                sort_by,
                                beta,
                                single_modality,
                                weighting,
                                l2,
                                learning_rate,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn point_seed(grid_seed: u64, index: usize) -> u64 {
    derive_seed(grid_seed, salt::GRID.wrapping_add(index as u64))
}

/// Trains one grid point.
pub fn run_grid_point(ctx: &GridContext<'_>, index: usize, config: FusionConfig) -> Result<(LeaderboardEntry, FitResult)> {
    let model = FusionModel::new(config, ctx.counts)?;
    let seed = point_seed(ctx.fit.seed, index);
    let opts = FitOptions { seed, ..ctx.fit.clone() };
    let fit = train_fusion(&model, &ctx.train, &ctx.val, ctx.counts, &opts)?;
    let entry = LeaderboardEntry {
        index,
        config,
        seed,
        n_params: model.layout().len,
        val_metric: fit.best_metric,
        selected_epoch: fit.selected_epoch,
    };
    Ok((entry, fit))
}

/// Sorts by descending metric, then fewer parameters, lower learning rate
/// and grid order.
pub fn rank(entries: &mut [LeaderboardEntry]) {
    entries.sort_by(|a, b| {
        b.val_metric
            .partial_cmp(&a.val_metric)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.n_params.cmp(&b.n_params))
            .then(a.config.learning_rate.partial_cmp(&b.config.learning_rate).unwrap_or(core::cmp::Ordering::Equal))
            .then(a.index.cmp(&b.index))
    });
}

impl GridOutcome {
    /// Builds the leaderboard from per-point results in any order.
    pub fn from_results(results: Vec<(LeaderboardEntry, FitResult)>) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::Empty("grid"));
        }
        let mut leaderboard: Vec<LeaderboardEntry> = results.iter().map(|(e, _)| e.clone()).collect();
        rank(&mut leaderboard);
        let best = leaderboard[0].clone();
        let best_fit = results
            .into_iter()
            .find(|(e, _)| e.index == best.index)
            .map(|(_, f)| f)
            .ok_or(Error::Empty("grid"))?;
        Ok(Self { best, best_fit, leaderboard })
    }
}

/// Exhaustive serial search over `points`.
pub fn grid_search(ctx: &GridContext<'_>, points: &[FusionConfig]) -> Result<GridOutcome> {
    let results = points
        .iter()
        .enumerate()
        .map(|(i, c)| run_grid_point(ctx, i, *c))
        .collect::<Result<Vec<_>>>()?;
    GridOutcome::from_results(results)
}
