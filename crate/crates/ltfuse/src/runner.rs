//! Experiment execution on top of the core protocol: parallel grid search
//! and stage inputs read from prediction files.

use std::path::Path;

use ltfuse_core::experts::PredictionMatrix;
use ltfuse_core::fusion::FusionConfig;
use ltfuse_core::training::{
    run_grid_point, two_level_membership, ExperimentConfig, ExpertFiles, FitResult, GridContext, LeaderboardEntry,
    PreparedData, Scenario, StagePredictions,
};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{load_counts, load_predictions};

/// Trains grid points on the rayon pool. Each point derives its seed from its
/// index, so the result equals the serial runner's.
pub fn parallel_runner(
    ctx: &GridContext<'_>,
    points: &[FusionConfig],
) -> ltfuse_core::Result<Vec<(LeaderboardEntry, FitResult)>> {
    points.par_iter().enumerate().map(|(i, c)| run_grid_point(ctx, i, *c)).collect()
}

fn load_stage(files: &ExpertFiles, single: bool) -> Result<StagePredictions> {
    let visual = load_predictions(Path::new(&files.visual))?;
    let semantic = match (&files.semantic, single) {
        (Some(p), false) => {
            let s: PredictionMatrix = load_predictions(Path::new(p))?;
            visual
                .check_aligned(&s)
                .map_err(|e| Error::Data(format!("{} vs {}: {e}", files.visual, p)))?;
            Some(s)
        }
        _ => None,
    };
    Ok(StagePredictions { visual, semantic, features: None })
}

/// Stage inputs from the prediction files named in `config`. Paths are
/// relative to the working directory.
pub fn prepare_from_files(config: &ExperimentConfig) -> Result<PreparedData> {
    let files = config
        .prediction_files
        .as_ref()
        .ok_or_else(|| Error::Usage("config has no prediction_files section".into()))?;
    let single = config.scenario == Scenario::VisionOnly;
    let counts = load_counts(Path::new(&files.counts))?;
    let fusion_train = load_stage(&files.fusion_train, single)?;
    let validation = load_stage(&files.validation, single)?;
    let test = load_stage(&files.test, single)?;
    for (name, s) in [("fusion_train", &fusion_train), ("validation", &validation), ("test", &test)] {
        if s.visual.k() != counts.k() {
            return Err(Error::Data(format!("{name}: predictions have k={} but counts have k={}", s.visual.k(), counts.k())));
        }
    }
    let two_level_tail = match config.scenario {
        Scenario::TwoLevel => Some(
            two_level_membership(&counts)
                .ok_or_else(|| Error::Data("two-level scenario needs counts with exactly two levels".into()))?,
        ),
        _ => None,
    };
    Ok(PreparedData { fit_counts: counts.clone(), counts, fusion_train, validation, test, two_level_tail })
}

/// Synthetic task or prediction files, whichever the config names.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    if config.prediction_files.is_some() {
        prepare_from_files(config)
    } else {
        Ok(ltfuse_core::training::prepare_synthetic(config)?.1)
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(format!("--threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}
