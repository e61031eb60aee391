//! Experts as opaque prediction matrices, a familiarity-biased simulator and
//! bias diagnostics.
//!
//! The simulator draws, for a sample of true class `y`,
//!
//! ```text
//! z_j = familiarity · curve(n̄_j) + τ · ε_j        (j ≠ y)
//! z_y = familiarity · curve(n̄_y) + skill(n̄_y)
//! p   = softmax(z / τ)
//! ε_j = √ρ · η_j + √(1 − ρ) · ξ_j,    η, ξ ~ N(0, 1)
//! ```
//!
//! with `skill(n̄) = s_min + (s_max − s_min) · curve(n̄)` and
//! `curve(n̄) = n̄^γ` (visual) or `(1 − n̄)^γ` (semantic). `ξ` is drawn from a
//! stream derived from `(seed, sample id)`, `η` from the sample id alone, so
//! all experts share it: `ρ = shared_noise` makes them err on the same
//! samples. Any subset of samples can be simulated independently.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::longtail::{ClassCounts, DatasetSplit, SampleRecord};
use crate::math::{argmax, softmax};
use crate::rng::{derived_rng, salt};
use crate::{Error, Result};

/// Row-sum tolerance of a valid prediction row.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Per-sample class probabilities of one expert, with sample ids and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    k: usize,
    ids: Vec<u64>,
    labels: Vec<usize>,
    probs: Vec<f64>,
}

impl PredictionMatrix {
    pub fn new(k: usize, ids: Vec<u64>, labels: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(k, ids, labels, probs, ROW_SUM_TOL)
    }

    /// Accepts rows whose sums are within `tol` of 1. Rows off by more than
    /// [`ROW_SUM_TOL`] are renormalised so the stored matrix always meets it.
    pub fn with_tolerance(k: usize, ids: Vec<u64>, labels: Vec<usize>, mut probs: Vec<f64>, tol: f64) -> Result<Self> {
        if k == 0 || ids.is_empty() {
            return Err(Error::Empty("prediction matrix"));
        }
        if labels.len() != ids.len() {
            return Err(Error::Dimension { context: "prediction labels", expected: ids.len(), actual: labels.len() });
        }
        if probs.len() != ids.len() * k {
            return Err(Error::Dimension { context: "prediction entries", expected: ids.len() * k, actual: probs.len() });
        }
        for (r, row) in probs.chunks_mut(k).enumerate() {
            if labels[r] >= k {
                return Err(Error::InvalidRow { row: r, reason: format!("label {} out of range for k = {k}", labels[r]) });
            }
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidRow { row: r, reason: format!("probability {bad} outside [0, 1]") });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidRow { row: r, reason: format!("row sums to {sum}, expected 1") });
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(Self { k, ids, labels, probs })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.k)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn argmax_predictions(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }

    /// Rows at the given positions, in that order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        let mut probs = Vec::with_capacity(rows.len() * self.k);
        for &r in rows {
            if r >= self.n() {
                return Err(Error::Index { index: r, len: self.n() });
            }
            ids.push(self.ids[r]);
            labels.push(self.labels[r]);
            probs.extend_from_slice(self.row(r));
        }
        Self::new(self.k, ids, labels, probs)
    }

    /// Checks that `other` describes the same samples in the same order.
    pub fn check_aligned(&self, other: &PredictionMatrix) -> Result<()> {
        if self.k != other.k {
            return Err(Error::Dimension { context: "expert class count", expected: self.k, actual: other.k });
        }
        if self.n() != other.n() {
            return Err(Error::Dimension { context: "expert sample count", expected: self.n(), actual: other.n() });
        }
        for (r, (a, b)) in self.ids.iter().zip(&other.ids).enumerate() {
            if a != b {
                return Err(Error::InvalidRow { row: r, reason: format!("sample_id mismatch: {a} vs {b}") });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExpertKind {
    /// Skill grows with the class count.
    VisualBiased,
    /// Skill shrinks with the class count.
    SemanticBiased,
    /// Fixed per-class skill, independent of counts.
    Custom { skills: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertProfile {
    pub kind: ExpertKind,
    pub s_min: f64,
    pub s_max: f64,
    /// Count sensitivity of the skill curve.
    pub gamma: f64,
    /// Noise temperature.
    pub tau: f64,
    /// Weight of the count-dependent logit offset shared by all classes.
    #[serde(default)]
    pub familiarity: f64,
    /// Fraction of noise variance shared by all experts, in `[0, 1]`.
    #[serde(default)]
    pub shared_noise: f64,
    pub seed: u64,
}

impl ExpertProfile {
    pub fn visual(seed: u64) -> Self {
        Self { kind: ExpertKind::VisualBiased, s_min: 0.3, s_max: 1.0, gamma: 0.5, tau: 0.3, familiarity: 0.5, shared_noise: 0.9, seed }
    }

    pub fn semantic(seed: u64) -> Self {
        Self { kind: ExpertKind::SemanticBiased, s_min: 0.3, s_max: 0.8, gamma: 0.5, tau: 0.3, familiarity: 0.5, shared_noise: 0.9, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.s_min && self.s_min <= self.s_max && self.s_max <= 1.0) {
            return Err(Error::Config(format!(
                "expert skill bounds must satisfy 0 <= s_min <= s_max <= 1 (got {}, {})",
                self.s_min, self.s_max
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config("expert tau must be positive".into()));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() || !self.familiarity.is_finite() {
            return Err(Error::Config("expert gamma must be >= 0 and familiarity finite".into()));
        }
        if !(0.0..=1.0).contains(&self.shared_noise) {
            return Err(Error::Config("expert shared_noise must lie in [0, 1]".into()));
        }
        if let ExpertKind::Custom { skills } = &self.kind {
            if skills.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::Config("custom skills must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn curve(&self, nbar: f64) -> f64 {
        match self.kind {
            ExpertKind::VisualBiased => fmath::powf(nbar, self.gamma),
            ExpertKind::SemanticBiased => fmath::powf(1.0 - nbar, self.gamma),
            ExpertKind::Custom { .. } => 0.0,
        }
    }

    /// Skill of the expert on class `y` after being fit on data with the given counts.
    pub fn skill(&self, y: usize, nbar: f64) -> f64 {
        match &self.kind {
            ExpertKind::Custom { skills } => skills[y],
            _ => self.s_min + (self.s_max - self.s_min) * self.curve(nbar),
        }
    }
}

/// Predictions of an expert "fit" on data with class counts `counts`, for the given samples.
pub fn simulate_expert(samples: &[SampleRecord], counts: &ClassCounts, profile: &ExpertProfile) -> Result<PredictionMatrix> {
    profile.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    let k = counts.k();
    if let ExpertKind::Custom { skills } = &profile.kind {
        if skills.len() != k {
            return Err(Error::Dimension { context: "custom skills", expected: k, actual: skills.len() });
        }
    }
    let nbar = counts.normalized();
    let offset: Vec<f64> = nbar.iter().map(|&n| profile.familiarity * profile.curve(n)).collect();
    let skill: Vec<f64> = (0..k).map(|y| profile.skill(y, nbar[y])).collect();
    let inv_tau = 1.0 / profile.tau;
    let (a, b) = (fmath::sqrt(profile.shared_noise), fmath::sqrt(1.0 - profile.shared_noise));
    let mut ids = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    let mut probs = Vec::with_capacity(samples.len() * k);
    let mut logits = vec![0.0; k];
    for s in samples {
        if s.label >= k {
            return Err(Error::Index { index: s.label, len: k });
        }
        let mut rng = derived_rng(profile.seed, s.id);
        let mut shared = derived_rng(salt::SHARED_NOISE, s.id);
        for (j, z) in logits.iter_mut().enumerate() {
            let own: f64 = rng.sample(StandardNormal);
            let common: f64 = shared.sample(StandardNormal);
            let noise = a * common + b * own;
            *z = if j == s.label {
                (offset[j] + skill[j]) * inv_tau
            } else {
                offset[j] * inv_tau + noise
            };
        }
        probs.extend(softmax(&logits)?);
        ids.push(s.id);
        labels.push(s.label);
    }
    PredictionMatrix::new(k, ids, labels, probs)
}

/// [`simulate_expert`] over every sample of a split, fit on its training counts.
pub fn simulate_split(split: &DatasetSplit, profile: &ExpertProfile) -> Result<PredictionMatrix> {
    simulate_expert(&split.samples, &split.train_counts(), profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Mean true-class probability over samples of each class; `None` when a
    /// class has no evaluation samples.
    pub mean_confidence: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    /// Spearman rank correlation between counts and mean confidence over the
    /// classes present.
    pub spearman: f64,
}

pub fn bias_report(preds: &PredictionMatrix, labels: &[usize], counts: &ClassCounts) -> Result<BiasReport> {
    let k = preds.k();
    if counts.k() != k {
        return Err(Error::Dimension { context: "bias report counts", expected: k, actual: counts.k() });
    }
    if labels.len() != preds.n() {
        return Err(Error::Dimension { context: "bias report labels", expected: preds.n(), actual: labels.len() });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labeled samples"));
    }
    let mut sum = vec![0.0; k];
    let mut n = vec![0usize; k];
    for (r, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Index { index: y, len: k });
        }
        sum[y] += preds.row(r)[y];
        n[y] += 1;
    }
    let mean_confidence: Vec<Option<f64>> =
        (0..k).map(|y| (n[y] > 0).then(|| sum[y] / n[y] as f64)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..k)
        .filter_map(|y| mean_confidence[y].map(|m| (counts.get(y) as f64, m)))
        .unzip();
    Ok(BiasReport { mean_confidence, counts: counts.as_slice().to_vec(), spearman: spearman(&xs, &ys) })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation (Pearson over average ranks); 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return 0.0;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / fmath::sqrt(sxx * syy)).clamp(-1.0, 1.0)
}

/// Top-1 accuracy over samples whose label is in `subset`, with the argmax
/// taken over the subset's columns only.
pub fn restricted_accuracy(preds: &PredictionMatrix, labels: &[usize], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Empty("class subset"));
    }
    let k = preds.k();
    if let Some(&bad) = subset.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidInput(format!("class {bad} is not one of the {k} classes")));
    }
    if labels.len() != preds.n() {
        return Err(Error::Dimension { context: "restricted accuracy labels", expected: preds.n(), actual: labels.len() });
    }
    let mut member = vec![false; k];
    subset.iter().for_each(|&c| member[c] = true);
    let (mut hit, mut total) = (0usize, 0usize);
    for (r, &y) in labels.iter().enumerate() {
        if y >= k || !member[y] {
            continue;
        }
        let row = preds.row(r);
        let mut best = subset[0];
        for &c in &subset[1..] {
            if row[c] > row[best] || (row[c] == row[best] && c < best) {
                best = c;
            }
        }
        total += 1;
        hit += usize::from(best == y);
    }
    if total == 0 {
        return Err(Error::Empty("samples of the class subset"));
    }
    Ok(hit as f64 / total as f64)
}
