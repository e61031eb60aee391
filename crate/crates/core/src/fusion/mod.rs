//! The debiasing fusion module.
//!
//! For one sample the module
//!
//! 1. stacks the two experts' rows into a `k × 2` matrix and sorts its rows by
//!    the descending confidence of one expert ([`stack_and_sort`]),
//! 2. runs `F` 2x2 filters down the class axis and averages over filters,
//!    giving a `(k − 1)`-vector `h` ([`backbone`]),
//! 3. maps `h` through affine heads to polynomial coefficients per expert and
//!    rescales each class by `σ(Σ_j c_j n̄_y^j)` ([`debias_weights`]),
//! 4. maps `h` to a trade-off `λ = σ(f_0 − β)` ([`lambda_head`]),
//! 5. scores `S(y) = λ w_V(y) p_V(y) + (1 − λ) w_S(y) p_S(y)` ([`fuse`]).
//!
//! [`FusionModel`] composes these with an exact backward pass. The
//! single-expert reduction uses a `k × 1` stack, `2 × 1` filters, `λ ≡ 1` and
//! no semantic head. The per-class ablation drops the `h` dependence of the
//! coefficient heads.

mod baselines;
mod model;
mod ops;

pub use baselines::{fusion_baselines, train_mixture_gate, BaselineMode, GateTraining, MixtureGate};
pub use model::{FusionData, FusionModel, FusionOutput, LambdaMode, LossAndGrad};
pub use ops::{backbone, debias_weights, fuse, lambda_head, stack_and_sort, SortedStack};

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::derived_rng;
use crate::rng::salt;
use crate::{Error, Result};

pub const DEGREES: [usize; 3] = [2, 3, 4];
pub const MAX_FILTERS: usize = 4;
pub const BETA_RANGE: (f64, f64) = (-2.0, 2.0);
/// Half-width of the uniform initialisation of convolution filters.
pub const FILTER_INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortBy {
    Visual,
    Semantic,
}

/// How the polynomial coefficients are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Coefficients are affine functions of `h`: weights vary per sample.
    PerSample,
    /// Coefficients are free parameters: one weight per class for all samples.
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub degree: usize,
    pub filters: usize,
    pub sort_by: SortBy,
    pub beta: f64,
    #[serde(default)]
    pub single_modality: bool,
    #[serde(default = "default_weighting")]
    pub weighting: Weighting,
    #[serde(default)]
    pub l2: f64,
    pub learning_rate: f64,
}

fn default_weighting() -> Weighting {
    Weighting::PerSample
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            filters: 2,
            sort_by: SortBy::Visual,
            beta: 0.0,
            single_modality: false,
            weighting: Weighting::PerSample,
            l2: 0.0,
            learning_rate: 1e-3,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !DEGREES.contains(&self.degree) {
            return Err(Error::Config(format!("degree {} not in {{2, 3, 4}}", self.degree)));
        }
        if !(1..=MAX_FILTERS).contains(&self.filters) {
            return Err(Error::Config(format!("filter count {} not in 1..=4", self.filters)));
        }
        if !(BETA_RANGE.0..=BETA_RANGE.1).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [-2, 2]", self.beta)));
        }
        if self.single_modality && self.sort_by != SortBy::Visual {
            return Err(Error::Config("single-modality fusion can only sort by the visual expert".into()));
        }
        if !(self.l2 >= 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("l2 must be >= 0 and learning rate > 0".into()));
        }
        Ok(())
    }

    /// Number of expert columns fed to the backbone.
    pub fn columns(&self) -> usize {
        if self.single_modality {
            1
        } else {
            2
        }
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionLayout {
    pub k: usize,
    pub degree: usize,
    pub filters: usize,
    pub columns: usize,
    pub conv_w: Range<usize>,
    pub conv_b: Range<usize>,
    pub head_v_w: Range<usize>,
    pub head_v_b: Range<usize>,
    pub head_s_w: Range<usize>,
    pub head_s_b: Range<usize>,
    pub lambda_w: Range<usize>,
    pub lambda_b: Range<usize>,
    pub len: usize,
}

impl FusionLayout {
    pub fn new(k: usize, config: &FusionConfig) -> Result<Self> {
        config.validate()?;
        if k < 2 {
            return Err(Error::InvalidInput("fusion needs at least 2 classes".into()));
        }
        let h = k - 1;
        let d = config.degree;
        let cols = config.columns();
        let per_sample = config.weighting == Weighting::PerSample;
        let dual = !config.single_modality;
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let conv_w = take(config.filters * 2 * cols);
        let conv_b = take(config.filters);
        let head_v_w = take(if per_sample { d * h } else { 0 });
        let head_v_b = take(d);
        let head_s_w = take(if dual && per_sample { d * h } else { 0 });
        let head_s_b = take(if dual { d } else { 0 });
        let lambda_w = take(if dual { h } else { 0 });
        let lambda_b = take(if dual { 1 } else { 0 });
        Ok(Self {
            k,
            degree: d,
            filters: config.filters,
            columns: cols,
            conv_w,
            conv_b,
            head_v_w,
            head_v_b,
            head_s_w,
            head_s_b,
            lambda_w,
            lambda_b,
            len: at,
        })
    }

    /// Named blocks, in storage order.
    pub fn blocks(&self) -> [(&'static str, Range<usize>); 8] {
        [
            ("conv_weights", self.conv_w.clone()),
            ("conv_bias", self.conv_b.clone()),
            ("visual_head_weights", self.head_v_w.clone()),
            ("visual_head_bias", self.head_v_b.clone()),
            ("semantic_head_weights", self.head_s_w.clone()),
            ("semantic_head_bias", self.head_s_b.clone()),
            ("lambda_head_weights", self.lambda_w.clone()),
            ("lambda_head_bias", self.lambda_b.clone()),
        ]
    }
}

/// Trainable parameters, stored flat in [`FusionLayout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub layout: FusionLayout,
    pub values: Vec<f64>,
}

impl FusionParams {
    pub fn zeros(layout: FusionLayout) -> Self {
        let values = alloc::vec![0.0; layout.len];
        Self { layout, values }
    }

    /// Filters uniform in `±FILTER_INIT_SCALE`, everything else zero.
    pub fn init(layout: FusionLayout, seed: u64) -> Self {
        let mut p = Self::zeros(layout);
        let mut rng = derived_rng(seed, salt::INIT);
        for v in &mut p.values[p.layout.conv_w.clone()] {
            *v = rng.gen_range(-FILTER_INIT_SCALE..FILTER_INIT_SCALE);
        }
        p
    }

    pub fn from_values(layout: FusionLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len {
            return Err(Error::Dimension { context: "fusion parameters", expected: layout.len, actual: values.len() });
        }
        crate::math::check_finite(&values, "fusion parameters")?;
        Ok(Self { layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, r: &Range<usize>) -> &[f64] {
        &self.values[r.clone()]
    }

    pub fn block_mut(&mut self, r: &Range<usize>) -> &mut [f64] {
        &mut self.values[r.clone()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(FusionConfig::default().validate().is_ok());
        let bad = [
            FusionConfig { degree: 5, ..Default::default() },
            FusionConfig { filters: 0, ..Default::default() },
            FusionConfig { filters: 5, ..Default::default() },
            FusionConfig { beta: 2.5, ..Default::default() },
            FusionConfig { single_modality: true, sort_by: SortBy::Semantic, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn parameter_budget_for_two_hundred_classes() {
        let cfg = FusionConfig { degree: 3, filters: 2, ..Default::default() };
        let layout = FusionLayout::new(200, &cfg).unwrap();
        // F·4 + F + 2·(d·(k−1) + d) + (k−1) + 1
        assert_eq!(layout.len, 8 + 2 + 2 * (3 * 199 + 3) + 199 + 1);
        assert!(layout.len as f64 >= 1015.0 / 2.0 && layout.len as f64 <= 1015.0 * 2.0);
    }

    #[test]
    fn per_class_and_single_modality_layouts_are_smaller() {
        let full = FusionLayout::new(20, &FusionConfig::default()).unwrap();
        let per_class =
            FusionLayout::new(20, &FusionConfig { weighting: Weighting::PerClass, ..Default::default() }).unwrap();
        let single = FusionLayout::new(20, &FusionConfig { single_modality: true, ..Default::default() }).unwrap();
        assert!(per_class.len < full.len);
        assert!(single.len < full.len);
        assert!(single.lambda_w.is_empty() && single.head_s_b.is_empty());
        assert_eq!(single.conv_w.len(), 2 * 2);
    }

    #[test]
    fn init_zeroes_heads() {
        let layout = FusionLayout::new(6, &FusionConfig::default()).unwrap();
        let p = FusionParams::init(layout.clone(), 4);
        assert!(p.block(&layout.conv_w).iter().all(|v| v.abs() < FILTER_INIT_SCALE && *v != 0.0));
        assert!(p.values[layout.conv_b.start..].iter().all(|&v| v == 0.0));
        assert_eq!(p, FusionParams::init(layout, 4));
    }
}
