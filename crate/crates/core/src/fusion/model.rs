use alloc::vec;
use alloc::vec::Vec;

use super::ops::{backbone, debias_weights, lambda_head, stack_and_sort, SortedStack};
use super::{FusionConfig, FusionLayout, FusionParams, Weighting};
use crate::experts::PredictionMatrix;
use crate::fmath;
use crate::longtail::ClassCounts;
use crate::math::{argmax, cross_entropy_grad, CE_FLOOR};
use crate::{Error, Result};

/// Outputs of the module for one sample, in original class order.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub lambda: f64,
    pub w_v: Vec<f64>,
    /// Empty for the single-expert reduction.
    pub w_s: Vec<f64>,
    pub scores: Vec<f64>,
    pub perm: Vec<usize>,
}

impl FusionOutput {
    pub fn predicted(&self) -> usize {
        argmax(&self.scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Learned,
    /// Bypasses the trade-off head with a constant.
    Fixed(f64),
}

/// Expert predictions for a set of samples, row-aligned.
#[derive(Debug, Clone, Copy)]
pub struct FusionData<'a> {
    pub visual: &'a PredictionMatrix,
    pub semantic: Option<&'a PredictionMatrix>,
    pub labels: &'a [usize],
}

impl<'a> FusionData<'a> {
    pub fn new(visual: &'a PredictionMatrix, semantic: Option<&'a PredictionMatrix>) -> Result<Self> {
        if let Some(s) = semantic {
            visual.check_aligned(s)?;
        }
        Ok(Self { visual, semantic, labels: visual.labels() })
    }

    pub fn len(&self) -> usize {
        self.visual.n()
    }

    pub fn is_empty(&self) -> bool {
        self.visual.n() == 0
    }

    fn rows(&self, r: usize) -> (&'a [f64], Option<&'a [f64]>) {
        (self.visual.row(r), self.semantic.map(|s| s.row(r)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

struct Trace {
    sorted: SortedStack,
    h: Vec<f64>,
    w_v: Vec<f64>,
    w_s: Vec<f64>,
    lambda: f64,
    scores: Vec<f64>,
}

/// The fusion module for a fixed class count vector and configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    config: FusionConfig,
    layout: FusionLayout,
    nbar: Vec<f64>,
    /// `nbar_pow[j][y] = n̄_y^j`.
    nbar_pow: Vec<Vec<f64>>,
}

impl FusionModel {
    /// `counts` are the training-set class counts fed to the debiasing heads.
    pub fn new(config: FusionConfig, counts: &ClassCounts) -> Result<Self> {
        let layout = FusionLayout::new(counts.k(), &config)?;
        let nbar = counts.normalized();
        let nbar_pow = (0..config.degree).map(|j| nbar.iter().map(|&n| fmath::powi(n, j)).collect()).collect();
        Ok(Self { config, layout, nbar, nbar_pow })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn layout(&self) -> &FusionLayout {
        &self.layout
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    pub fn normalized_counts(&self) -> &[f64] {
        &self.nbar
    }

    pub fn init_params(&self, seed: u64) -> FusionParams {
        FusionParams::init(self.layout.clone(), seed)
    }

    fn check_params(&self, params: &FusionParams) -> Result<()> {
        if params.layout != self.layout {
            return Err(Error::InvalidInput("parameters were built for a different layout".into()));
        }
        Ok(())
    }

    fn check_inputs(&self, p_v: &[f64], p_s: Option<&[f64]>) -> Result<()> {
        let k = self.k();
        if p_v.len() != k {
            return Err(Error::Dimension { context: "visual expert row", expected: k, actual: p_v.len() });
        }
        match (self.config.single_modality, p_s) {
            (true, Some(_)) => Err(Error::InvalidInput("single-modality fusion takes one expert".into())),
            (false, None) => Err(Error::InvalidInput("dual fusion needs both experts".into())),
            (_, Some(s)) if s.len() != k => {
                Err(Error::Dimension { context: "semantic expert row", expected: k, actual: s.len() })
            }
            _ => Ok(()),
        }
    }

    /// Full forward pass: `p_s` must be `None` exactly for the single-expert reduction.
    pub fn forward(&self, params: &FusionParams, p_v: &[f64], p_s: Option<&[f64]>) -> Result<FusionOutput> {
        self.forward_with(params, p_v, p_s, LambdaMode::Learned)
    }

    pub fn forward_with(
        &self,
        params: &FusionParams,
        p_v: &[f64],
        p_s: Option<&[f64]>,
        lambda: LambdaMode,
    ) -> Result<FusionOutput> {
        self.check_params(params)?;
        self.check_inputs(p_v, p_s)?;
        let t = self.trace(params, p_v, p_s, lambda)?;
        Ok(FusionOutput { lambda: t.lambda, w_v: t.w_v, w_s: t.w_s, scores: t.scores, perm: t.sorted.perm })
    }

    /// `S(y) = w_V(y) p_V(y)`: only valid for a single-modality configuration.
    pub fn smdragon_forward(&self, params: &FusionParams, p_v: &[f64]) -> Result<Vec<f64>> {
        if !self.config.single_modality {
            return Err(Error::Config("smdragon_forward requires a single-modality configuration".into()));
        }
        Ok(self.forward(params, p_v, None)?.scores)
    }

    fn trace(&self, params: &FusionParams, p_v: &[f64], p_s: Option<&[f64]>, mode: LambdaMode) -> Result<Trace> {
        let l = &self.layout;
        let sorted = stack_and_sort(p_v, p_s, self.config.sort_by)?;
        let h = backbone(&sorted, params.block(&l.conv_w), params.block(&l.conv_b))?;
        let (_, w_v) = debias_weights(&h, &self.nbar, params.block(&l.head_v_w), params.block(&l.head_v_b))?;
        let (w_s, lambda) = match p_s {
            Some(_) => {
                let (_, w_s) = debias_weights(&h, &self.nbar, params.block(&l.head_s_w), params.block(&l.head_s_b))?;
                let lambda = match mode {
                    LambdaMode::Learned => {
                        lambda_head(&h, params.block(&l.lambda_w), params.block(&l.lambda_b)[0], self.config.beta)?.1
                    }
                    LambdaMode::Fixed(v) => v,
                };
                (w_s, lambda)
            }
            None => (Vec::new(), 1.0),
        };
        let scores = match p_s {
            Some(p_s) => (0..self.k()).map(|y| lambda * w_v[y] * p_v[y] + (1.0 - lambda) * w_s[y] * p_s[y]).collect(),
            None => w_v.iter().zip(p_v).map(|(w, p)| w * p).collect(),
        };
        Ok(Trace { sorted, h, w_v, w_s, lambda, scores })
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(scores)`.
    fn backward(
        &self,
        params: &FusionParams,
        t: &Trace,
        p_v: &[f64],
        p_s: Option<&[f64]>,
        learned_lambda: bool,
        g_scores: &[f64],
        grad: &mut [f64],
    ) {
        let l = &self.layout;
        let k = self.k();
        let hn = k - 1;
        let d = self.config.degree;
        let per_sample = self.config.weighting == Weighting::PerSample;
        let mut dh = vec![0.0; hn];

        let head = |dz: &[f64], w_range: &core::ops::Range<usize>, b_range: &core::ops::Range<usize>, grad: &mut [f64], dh: &mut [f64]| {
            for j in 0..d {
                let dc: f64 = dz.iter().zip(&self.nbar_pow[j]).map(|(a, b)| a * b).sum();
                grad[b_range.start + j] += dc;
                if per_sample {
                    let row = w_range.start + j * hn;
                    for r in 0..hn {
                        grad[row + r] += dc * t.h[r];
                        dh[r] += dc * params.values[row + r];
                    }
                }
            }
        };

        let lam = t.lambda;
        let dz_v: Vec<f64> = (0..k).map(|y| g_scores[y] * lam * p_v[y] * t.w_v[y] * (1.0 - t.w_v[y])).collect();
        head(&dz_v, &l.head_v_w, &l.head_v_b, grad, &mut dh);

        if let Some(p_s) = p_s {
            let dz_s: Vec<f64> =
                (0..k).map(|y| g_scores[y] * (1.0 - lam) * p_s[y] * t.w_s[y] * (1.0 - t.w_s[y])).collect();
            head(&dz_s, &l.head_s_w, &l.head_s_b, grad, &mut dh);
            if learned_lambda {
                let dlam: f64 = (0..k).map(|y| g_scores[y] * (t.w_v[y] * p_v[y] - t.w_s[y] * p_s[y])).sum();
                let df0 = dlam * lam * (1.0 - lam);
                grad[l.lambda_b.start] += df0;
                for r in 0..hn {
                    grad[l.lambda_w.start + r] += df0 * t.h[r];
                    dh[r] += df0 * params.values[l.lambda_w.start + r];
                }
            }
        }

        // Pooling spreads dh/F to every filter; then the convolution.
        let nf = self.config.filters;
        let cols = self.layout.columns;
        let taps = 2 * cols;
        let x = &t.sorted.values;
        for f in 0..nf {
            let mut gb = 0.0;
            for r in 0..hn {
                let g = dh[r] / nf as f64;
                gb += g;
                for tap in 0..taps {
                    grad[l.conv_w.start + f * taps + tap] += g * x[r * cols + tap];
                }
            }
            grad[l.conv_b.start + f] += gb;
        }
    }

    /// Mean normalised-score cross-entropy over `rows` plus `l2 · ‖θ‖²`, with
    /// its exact gradient. `class_weights` switches to the balanced loss.
    pub fn loss_and_grad(
        &self,
        params: &FusionParams,
        data: &FusionData<'_>,
        rows: &[usize],
        class_weights: Option<&[f64]>,
    ) -> Result<LossAndGrad> {
        self.loss_impl(params, data, rows, class_weights, true)
    }

    pub fn loss(&self, params: &FusionParams, data: &FusionData<'_>, rows: &[usize], class_weights: Option<&[f64]>) -> Result<f64> {
        Ok(self.loss_impl(params, data, rows, class_weights, false)?.loss)
    }

    fn loss_impl(
        &self,
        params: &FusionParams,
        data: &FusionData<'_>,
        rows: &[usize],
        class_weights: Option<&[f64]>,
        with_grad: bool,
    ) -> Result<LossAndGrad> {
        self.check_params(params)?;
        if rows.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        if let Some(w) = class_weights {
            if w.len() != self.k() {
                return Err(Error::Dimension { context: "class weights", expected: self.k(), actual: w.len() });
            }
        }
        let mut grad = if with_grad { vec![0.0; params.len()] } else { Vec::new() };
        let inv_b = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        let mut g_scores = vec![0.0; self.k()];
        for &r in rows {
            if r >= data.len() {
                return Err(Error::Index { index: r, len: data.len() });
            }
            let (p_v, p_s) = data.rows(r);
            self.check_inputs(p_v, p_s)?;
            let label = data.labels[r];
            let t = self.trace(params, p_v, p_s, LambdaMode::Learned)?;
            let total: f64 = t.scores.iter().sum();
            if !(total > 0.0) {
                return Err(Error::DegenerateScore);
            }
            let s_hat = t.scores[label] / total;
            let w = class_weights.map_or(1.0, |w| w[label]);
            loss += -w * fmath::ln(s_hat + CE_FLOOR) * inv_b;
            if with_grad {
                let a = cross_entropy_grad(s_hat, w) * inv_b;
                for (y, g) in g_scores.iter_mut().enumerate() {
                    let delta = if y == label { 1.0 } else { 0.0 };
                    *g = a * (delta - s_hat) / total;
                }
                self.backward(params, &t, p_v, p_s, true, &g_scores, &mut grad);
            }
        }
        let l2 = self.config.l2;
        if l2 > 0.0 {
            loss += l2 * params.values.iter().map(|v| v * v).sum::<f64>();
            if with_grad {
                for (g, v) in grad.iter_mut().zip(&params.values) {
                    *g += 2.0 * l2 * v;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("fusion loss"));
        }
        Ok(LossAndGrad { loss, grad })
    }

    /// Fused scores for every row of `data`.
    pub fn scores(&self, params: &FusionParams, data: &FusionData<'_>) -> Result<Vec<Vec<f64>>> {
        (0..data.len())
            .map(|r| {
                let (p_v, p_s) = data.rows(r);
                Ok(self.forward(params, p_v, p_s)?.scores)
            })
            .collect()
    }

    /// Argmax class of the fused scores for every row of `data`.
    pub fn predict(&self, params: &FusionParams, data: &FusionData<'_>) -> Result<Vec<usize>> {
        Ok(self.scores(params, data)?.iter().map(|s| argmax(s)).collect())
    }

    /// Gradient of `Σ_y c_y S(y)` for one sample; exposed for gradient checks.
    pub fn score_gradient(
        &self,
        params: &FusionParams,
        p_v: &[f64],
        p_s: Option<&[f64]>,
        upstream: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_inputs(p_v, p_s)?;
        if upstream.len() != self.k() {
            return Err(Error::Dimension { context: "upstream gradient", expected: self.k(), actual: upstream.len() });
        }
        let t = self.trace(params, p_v, p_s, LambdaMode::Learned)?;
        let mut grad = vec![0.0; params.len()];
        self.backward(params, &t, p_v, p_s, true, upstream, &mut grad);
        Ok(grad)
    }
}
