use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EarlyStopper, SelectionMetric};
use crate::fusion::{FusionData, FusionModel, FusionParams};
use crate::longtail::ClassCounts;
use crate::math::{adam_step, AdamConfig, AdamState};
use crate::metrics::{acc_lt, acc_pc};
use crate::rng::{derived_rng, salt};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub metric: SelectionMetric,
    /// Balanced cross-entropy weights; plain cross-entropy when `None`.
    pub class_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the initialisation.
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Parameters of the selected epoch.
    pub params: FusionParams,
    pub history: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub stopped_epoch: usize,
    pub best_metric: f64,
}

/// Validation metric of the model on `data`.
pub fn validation_metric(
    model: &FusionModel,
    params: &FusionParams,
    data: &FusionData<'_>,
    counts: &ClassCounts,
    metric: SelectionMetric,
) -> Result<f64> {
    let pred = model.predict(params, data)?;
    match metric {
        SelectionMetric::AccPc => acc_pc(&pred, data.labels),
        SelectionMetric::AccLt => acc_lt(&pred, data.labels, &counts.distribution()?),
    }
}

/// Mini-batch ADAM on `train` with early stopping on `val`. The
/// initialisation competes as epoch 0.
pub fn train_fusion(
    model: &FusionModel,
    train: &FusionData<'_>,
    val: &FusionData<'_>,
    counts: &ClassCounts,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut params = model.init_params(opts.seed);
    let mut best = params.clone();
    let mut stopper = EarlyStopper::new(opts.patience);
    let m0 = validation_metric(model, &params, val, counts, opts.metric)?;
    let mut history = alloc::vec![EpochRecord { epoch: 0, train_loss: None, val_metric: m0 }];
    let mut stop = stopper.observe(m0);
    let mut adam = AdamState::new(AdamConfig::new(model.config().learning_rate), params.len());
    let mut rng = derived_rng(opts.seed, salt::SHUFFLE);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = opts.batch_size.max(1);
    let weights = opts.class_weights.as_deref();
    let mut epoch = 0;
    while !stop && epoch < opts.max_epochs {
        epoch += 1;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let lg = model.loss_and_grad(&params, train, chunk, weights)?;
            loss_sum += lg.loss * chunk.len() as f64;
            adam_step(&mut params.values, &lg.grad, &mut adam)?;
        }
        let m = validation_metric(model, &params, val, counts, opts.metric)?;
        history.push(EpochRecord { epoch, train_loss: Some(loss_sum / train.len() as f64), val_metric: m });
        stop = stopper.observe(m);
        if stopper.is_best() {
            best = params.clone();
        }
    }
    Ok(FitResult {
        params: best,
        history,
        selected_epoch: stopper.best_position() - 1,
        stopped_epoch: epoch,
        best_metric: stopper.best(),
    })
}
