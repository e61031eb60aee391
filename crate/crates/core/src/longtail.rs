//! Class-frequency profiles, dataset splits and hold-out carving.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::rng::{derive_seed, derived_rng, rng_from_seed, salt};
use crate::{Error, Result};

/// Per-class training-sample counts `n_y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassCounts(Vec<usize>);

impl ClassCounts {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("class counts"));
        }
        Ok(Self(counts))
    }

    /// Counts of each label in `labels`, for `k` classes.
    pub fn from_labels(labels: impl IntoIterator<Item = usize>, k: usize) -> Result<Self> {
        let mut counts = vec![0; k];
        for y in labels {
            *counts.get_mut(y).ok_or(Error::Index { index: y, len: k })? += 1;
        }
        Self::new(counts)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn get(&self, y: usize) -> usize {
        self.0[y]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> usize {
        self.0.iter().copied().min().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.total() as f64 / self.k() as f64
    }

    pub fn median(&self) -> f64 {
        let mut s = self.0.clone();
        s.sort_unstable();
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2] as f64
        } else {
            (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
        }
    }

    /// `n̄_y = n_y / max_y n_y`; all zeros if every class is empty.
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.max();
        if max == 0 {
            return vec![0.0; self.k()];
        }
        self.0.iter().map(|&n| n as f64 / max as f64).collect()
    }

    /// Training class distribution `n_y / Σ n`.
    pub fn distribution(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("class counts (all zero)"));
        }
        Ok(self.0.iter().map(|&n| n as f64 / total as f64).collect())
    }

    /// Class indices ordered by descending count, ties by ascending index.
    pub fn order_by_count_desc(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| self.0[b].cmp(&self.0[a]).then(a.cmp(&b)));
        order
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&i| self.0[i]).collect())
    }
}

/// How class counts were generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FrequencyProfile {
    Exponential {
        k: usize,
        n_max: usize,
        n_min: usize,
        /// `rank_order[r]` is the class placed at rank `r`; identity when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank_order: Option<Vec<usize>>,
    },
    TwoLevel {
        k_head: usize,
        n_head: usize,
        k_tail: usize,
        shots: usize,
    },
}

impl FrequencyProfile {
    pub fn counts(&self) -> Result<ClassCounts> {
        match self {
            FrequencyProfile::Exponential { k, n_max, n_min, rank_order } => match rank_order {
                Some(order) => exponential_profile_ordered(*k, *n_max, *n_min, order),
                None => exponential_profile(*k, *n_max, *n_min),
            },
            FrequencyProfile::TwoLevel { k_head, n_head, k_tail, shots } => {
                two_level_profile(*k_head, *n_head, *k_tail, *shots)
            }
        }
    }

    pub fn k(&self) -> usize {
        match self {
            FrequencyProfile::Exponential { k, .. } => *k,
            FrequencyProfile::TwoLevel { k_head, k_tail, .. } => k_head + k_tail,
        }
    }

    /// Head/tail boundary used for hold-out carving: the level boundary for
    /// two-level profiles, the count median otherwise.
    pub fn boundary(&self, counts: &ClassCounts) -> HeadTailBoundary {
        match self {
            FrequencyProfile::TwoLevel { k_head, k_tail, .. } => {
                HeadTailBoundary::Explicit((0..k_head + k_tail).map(|y| y >= *k_head).collect())
            }
            FrequencyProfile::Exponential { .. } => HeadTailBoundary::median(counts),
        }
    }
}

/// `count(r) = round(a · b^{−r})` with `a = n_max`, `b = (n_max/n_min)^{1/(k−1)}`,
/// endpoints pinned to exactly `n_max` and `n_min`. Rank 0 is class 0.
pub fn exponential_profile(k: usize, n_max: usize, n_min: usize) -> Result<ClassCounts> {
    let order: Vec<usize> = (0..k).collect();
    exponential_profile_ordered(k, n_max, n_min, &order)
}

/// As [`exponential_profile`], placing rank `r` at class `rank_order[r]`.
pub fn exponential_profile_ordered(k: usize, n_max: usize, n_min: usize, rank_order: &[usize]) -> Result<ClassCounts> {
    if k < 2 {
        return Err(Error::InvalidInput("exponential profile needs k >= 2".into()));
    }
    if n_min < 1 {
        return Err(Error::InvalidInput("exponential profile needs n_min >= 1".into()));
    }
    if n_min > n_max {
        return Err(Error::InvalidInput(format!("n_min ({n_min}) exceeds n_max ({n_max})")));
    }
    check_permutation(rank_order, k)?;
    let a = n_max as f64;
    let b = fmath::powf(n_max as f64 / n_min as f64, 1.0 / (k - 1) as f64);
    let mut counts = vec![0; k];
    for r in 0..k {
        let c = if r == 0 {
            n_max
        } else if r == k - 1 {
            n_min
        } else {
            let v = fmath::round_half_up(a * fmath::powf(b, -(r as f64))) as usize;
            v.clamp(n_min, n_max)
        };
        counts[rank_order[r]] = c;
    }
    ClassCounts::new(counts)
}

fn check_permutation(order: &[usize], k: usize) -> Result<()> {
    if order.len() != k {
        return Err(Error::Dimension { context: "rank order", expected: k, actual: order.len() });
    }
    let mut seen = vec![false; k];
    for &c in order {
        if c >= k || seen[c] {
            return Err(Error::InvalidInput("rank order must be a permutation of 0..k".into()));
        }
        seen[c] = true;
    }
    Ok(())
}

/// `k_head` classes with `n_head` samples followed by `k_tail` classes with `shots`.
pub fn two_level_profile(k_head: usize, n_head: usize, k_tail: usize, shots: usize) -> Result<ClassCounts> {
    if k_head == 0 || n_head == 0 || k_tail == 0 || shots == 0 {
        return Err(Error::InvalidInput("two-level profile arguments must all be >= 1".into()));
    }
    let mut counts = vec![n_head; k_head];
    counts.extend(core::iter::repeat(shots).take(k_tail));
    ClassCounts::new(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

/// Labeled samples from which splits are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    pub k: usize,
    pub dim: usize,
    pub samples: Vec<SampleRecord>,
}

impl LabeledPool {
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut n = vec![0; self.k];
        for s in &self.samples {
            n[s.label] += 1;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Holdout,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 4] = [Partition::Train, Partition::Holdout, Partition::Validation, Partition::Test];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Holdout => "holdout",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

/// A pool with every sample tagged by partition.
///
/// The training data of a split is `Train ∪ Holdout`: the hold-out tag only
/// marks which training samples are carved out for fitting the fusion module.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub k: usize,
    pub profile: Option<FrequencyProfile>,
    pub seed: u64,
    pub val_fraction: f64,
    pub requested: ClassCounts,
    /// Some class could not supply its requested count.
    pub truncated: bool,
    pub val_per_class: usize,
    pub samples: Vec<SampleRecord>,
    pub partitions: Vec<Partition>,
}

impl DatasetSplit {
    pub fn indices(&self, p: Partition) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.partitions[i] == p).collect()
    }

    /// Indices of all training samples, hold-out included.
    pub fn training_indices(&self) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| matches!(self.partitions[i], Partition::Train | Partition::Holdout))
            .collect()
    }

    pub fn counts_of(&self, idx: &[usize]) -> ClassCounts {
        let mut n = vec![0; self.k];
        for &i in idx {
            n[self.samples[i].label] += 1;
        }
        ClassCounts(n)
    }

    /// Per-class counts of the full training data (hold-out included).
    pub fn train_counts(&self) -> ClassCounts {
        self.counts_of(&self.training_indices())
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.samples[i].label).collect()
    }

    pub fn ids(&self, idx: &[usize]) -> Vec<u64> {
        idx.iter().map(|&i| self.samples[i].id).collect()
    }

    /// Re-tags hold-out samples; previous hold-out tags are reset to train.
    pub fn apply_holdout(&mut self, holdout: &HoldoutSplit) {
        for p in &mut self.partitions {
            if *p == Partition::Holdout {
                *p = Partition::Train;
            }
        }
        for &i in &holdout.holdout {
            self.partitions[i] = Partition::Holdout;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub val_fraction: f64,
    pub seed: u64,
    pub allow_truncation: bool,
    pub allow_empty: bool,
}

impl SplitOptions {
    pub fn new(val_fraction: f64, seed: u64) -> Self {
        Self { val_fraction, seed, allow_truncation: false, allow_empty: false }
    }
}

/// Per-class validation size: the largest `c` with `k·c ≤ val_fraction · train_size`, at least 1.
pub fn validation_per_class(k: usize, train_size: usize, val_fraction: f64) -> usize {
    let c = fmath::floor_tol(val_fraction * train_size as f64 / k as f64);
    (c as usize).max(1)
}

/// Samples the training set per class without replacement, then a constant
/// number of validation samples per class; the rest of the pool is test.
pub fn draw_split(
    pool: &LabeledPool,
    counts: &ClassCounts,
    opts: &SplitOptions,
    profile: Option<FrequencyProfile>,
) -> Result<DatasetSplit> {
    let k = pool.k;
    if counts.k() != k {
        return Err(Error::Dimension { context: "split counts", expected: k, actual: counts.k() });
    }
    if !(0.0..1.0).contains(&opts.val_fraction) {
        return Err(Error::InvalidInput("val_fraction must lie in [0, 1)".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, s) in pool.samples.iter().enumerate() {
        if s.label >= k {
            return Err(Error::Index { index: s.label, len: k });
        }
        by_class[s.label].push(i);
    }
    let mut truncated = false;
    let mut train_n = vec![0; k];
    for y in 0..k {
        let want = counts.get(y);
        let have = by_class[y].len();
        if have < want {
            if !opts.allow_truncation {
                return Err(Error::InvalidInput(format!(
                    "class {y}: pool has {have} samples, {want} requested for training"
                )));
            }
            truncated = true;
        }
        train_n[y] = want.min(have);
    }
    let train_total: usize = train_n.iter().sum();
    if train_total == 0 && !opts.allow_empty {
        return Err(Error::Empty("training set (all requested counts are zero)"));
    }
    let c = validation_per_class(k, train_total, opts.val_fraction);
    let mut partitions = vec![Partition::Test; pool.samples.len()];
    for y in 0..k {
        let mut idx = by_class[y].clone();
        let mut rng = derived_rng(derive_seed(opts.seed, salt::SPLIT), y as u64);
        idx.shuffle(&mut rng);
        let remaining = idx.len() - train_n[y];
        if remaining < c {
            if !opts.allow_truncation {
                return Err(Error::InvalidInput(format!(
                    "class {y}: {remaining} samples left for validation, {c} needed"
                )));
            }
            truncated = true;
        }
        for &i in &idx[..train_n[y]] {
            partitions[i] = Partition::Train;
        }
        for &i in idx[train_n[y]..].iter().take(c) {
            partitions[i] = Partition::Validation;
        }
    }
    Ok(DatasetSplit {
        k,
        profile,
        seed: opts.seed,
        val_fraction: opts.val_fraction,
        requested: counts.clone(),
        truncated,
        val_per_class: c,
        samples: pool.samples.clone(),
        partitions,
    })
}

/// Which classes count as tail when carving the hold-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadTailBoundary {
    /// Classes with `n_y <= threshold` are tail.
    TailAtOrBelow(f64),
    /// `is_tail[y]` per class.
    Explicit(Vec<bool>),
}

impl HeadTailBoundary {
    pub fn median(counts: &ClassCounts) -> Self {
        HeadTailBoundary::TailAtOrBelow(counts.median())
    }

    pub fn is_tail(&self, y: usize, n_y: usize) -> bool {
        match self {
            HeadTailBoundary::TailAtOrBelow(t) => (n_y as f64) <= *t,
            HeadTailBoundary::Explicit(v) => v[y],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    /// Sample indices (into the split) kept for fitting the experts.
    pub fit: Vec<usize>,
    pub holdout: Vec<usize>,
    /// Classes whose single training sample could not be split and stayed in `fit`.
    pub retained_singletons: Vec<usize>,
}

/// Number of samples of a class of size `n` moved to the hold-out set.
/// Classes of size 1 keep their sample.
pub fn holdout_size(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    (fmath::ceil_tol(fraction * n as f64) as usize).min(n - 1)
}

/// Carves `⌈tail_fraction·n_y⌉` samples from each tail class and
/// `⌈head_fraction·n_y⌉` from each head class of the training data.
pub fn holdout_split(
    split: &DatasetSplit,
    tail_fraction: f64,
    head_fraction: f64,
    boundary: &HeadTailBoundary,
    seed: u64,
) -> Result<HoldoutSplit> {
    for f in [tail_fraction, head_fraction] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidInput("hold-out fractions must lie in [0, 1)".into()));
        }
    }
    if let HeadTailBoundary::Explicit(v) = boundary {
        if v.len() != split.k {
            return Err(Error::Dimension { context: "head/tail boundary", expected: split.k, actual: v.len() });
        }
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); split.k];
    for i in split.training_indices() {
        by_class[split.samples[i].label].push(i);
    }
    let mut out = HoldoutSplit { fit: Vec::new(), holdout: Vec::new(), retained_singletons: Vec::new() };
    for (y, idx) in by_class.iter_mut().enumerate() {
        let n = idx.len();
        let frac = if boundary.is_tail(y, n) { tail_fraction } else { head_fraction };
        if n == 1 && frac > 0.0 {
            out.retained_singletons.push(y);
        }
        let h = holdout_size(n, frac);
        let mut rng = derived_rng(derive_seed(seed, salt::HOLDOUT), y as u64);
        idx.shuffle(&mut rng);
        out.holdout.extend_from_slice(&idx[..h]);
        out.fit.extend_from_slice(&idx[h..]);
    }
    out.fit.sort_unstable();
    out.holdout.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskConfig {
    pub dim: usize,
    /// Radius of the sphere on which class means are placed.
    pub separation: f64,
    /// Extra samples per class beyond the training count, for validation and test.
    pub eval_reserve: usize,
    pub seed: u64,
}

/// Isotropic unit-variance Gaussian clusters, one per class, with means drawn
/// uniformly on a sphere of radius `separation`. Class `y` receives
/// `counts[y] + eval_reserve` samples; ids are assigned sequentially.
pub fn synthetic_task(counts: &ClassCounts, cfg: &SyntheticTaskConfig) -> Result<LabeledPool> {
    if cfg.dim == 0 {
        return Err(Error::InvalidInput("dim must be >= 1".into()));
    }
    if !(cfg.separation > 0.0) || !cfg.separation.is_finite() {
        return Err(Error::InvalidInput("separation must be positive".into()));
    }
    let k = counts.k();
    let means = class_means(k, cfg.dim, cfg.separation, cfg.seed);
    let mut rng = derived_rng(cfg.seed, salt::TASK);
    let mut samples = Vec::new();
    let mut id = 0u64;
    for (y, mean) in means.iter().enumerate() {
        for _ in 0..counts.get(y) + cfg.eval_reserve {
            let x: Vec<f64> = mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect();
            samples.push(SampleRecord { id, label: y, features: Some(x) });
            id += 1;
        }
    }
    Ok(LabeledPool { k, dim: cfg.dim, samples })
}

/// Class means of [`synthetic_task`] for the given seed.
pub fn class_means(k: usize, dim: usize, separation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(derive_seed(seed, salt::TASK ^ 1));
    (0..k)
        .map(|_| loop {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = fmath::sqrt(g.iter().map(|x| x * x).sum());
            if norm > 1e-12 {
                break g.into_iter().map(|x| separation * x / norm).collect();
            }
        })
        .collect()
}

/// A pool without features: `counts[y] + reserve` samples of each class.
pub fn label_only_pool(counts: &ClassCounts, reserve: usize) -> LabeledPool {
    let mut samples = Vec::new();
    let mut id = 0u64;
    for y in 0..counts.k() {
        for _ in 0..counts.get(y) + reserve {
            samples.push(SampleRecord { id, label: y, features: None });
            id += 1;
        }
    }
    LabeledPool { k: counts.k(), dim: 0, samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exponential_endpoints() {
        assert_eq!(exponential_profile(2, 43, 3).unwrap().as_slice(), &[43, 3]);
        let c = exponential_profile(200, 43, 3).unwrap();
        assert_eq!(c.get(0), 43);
        assert_eq!(c.get(199), 3);
        assert!(exponential_profile(5, 3, 4).is_err());
        assert!(exponential_profile(1, 3, 3).is_err());
    }

    #[test]
    fn exponential_respects_rank_order() {
        let order = [2, 0, 1];
        let c = exponential_profile_ordered(3, 100, 1, &order).unwrap();
        assert_eq!(c.as_slice(), &[10, 1, 100]);
        assert!(exponential_profile_ordered(3, 100, 1, &[0, 0, 1]).is_err());
    }

    #[test]
    fn two_level_examples() {
        assert_eq!(two_level_profile(2, 5, 3, 2).unwrap().as_slice(), &[5, 5, 2, 2, 2]);
        let c = two_level_profile(4, 30, 6, 1).unwrap();
        assert!(c.as_slice()[4..].iter().all(|&n| n == 1));
        assert!(two_level_profile(2, 5, 0, 2).is_err());
    }

    #[test]
    fn validation_size_example() {
        assert_eq!(validation_per_class(200, 2945, 0.2), 2);
        assert_eq!(validation_per_class(10, 3, 0.2), 1);
    }

    #[test]
    fn draw_split_basic() {
        let counts = ClassCounts::new(vec![6, 3, 1]).unwrap();
        let pool = label_only_pool(&counts, 4);
        let split = draw_split(&pool, &counts, &SplitOptions::new(0.2, 3), None).unwrap();
        assert_eq!(split.train_counts(), counts);
        assert_eq!(split.val_per_class, 1);
        let val = split.counts_of(&split.indices(Partition::Validation));
        assert_eq!(val.as_slice(), &[1, 1, 1]);
        let again = draw_split(&pool, &counts, &SplitOptions::new(0.2, 3), None).unwrap();
        assert_eq!(split, again);
        let other = draw_split(&pool, &counts, &SplitOptions::new(0.2, 4), None).unwrap();
        assert_ne!(split.partitions, other.partitions);
    }

    #[test]
    fn draw_split_zero_counts_and_truncation() {
        let zero = ClassCounts::new(vec![0, 0]).unwrap();
        let pool = label_only_pool(&zero, 3);
        assert!(draw_split(&pool, &zero, &SplitOptions::new(0.2, 1), None).is_err());
        let mut opts = SplitOptions::new(0.2, 1);
        opts.allow_empty = true;
        let s = draw_split(&pool, &zero, &opts, None).unwrap();
        assert!(s.indices(Partition::Train).is_empty());

        let want = ClassCounts::new(vec![5, 2]).unwrap();
        let small = label_only_pool(&ClassCounts::new(vec![3, 0]).unwrap(), 0);
        assert!(draw_split(&small, &want, &SplitOptions::new(0.2, 1), None).is_err());
        let mut opts = SplitOptions::new(0.2, 1);
        opts.allow_truncation = true;
        let s = draw_split(&small, &want, &opts, None).unwrap();
        assert!(s.truncated);
        assert_eq!(s.train_counts().as_slice(), &[3, 0]);
    }

    #[test]
    fn holdout_examples() {
        assert_eq!(holdout_size(4, 0.5), 2);
        assert_eq!(holdout_size(10, 0.2), 2);
        assert_eq!(holdout_size(15, 0.2), 3);
        assert_eq!(holdout_size(1, 0.5), 0);
        assert_eq!(holdout_size(2, 0.5), 1);

        let counts = ClassCounts::new(vec![10, 4, 1]).unwrap();
        let pool = label_only_pool(&counts, 2);
        let split = draw_split(&pool, &counts, &SplitOptions::new(0.2, 9), None).unwrap();
        let boundary = HeadTailBoundary::Explicit(vec![false, true, true]);
        let h = holdout_split(&split, 0.5, 0.2, &boundary, 1).unwrap();
        let held = split.counts_of(&h.holdout);
        assert_eq!(held.as_slice(), &[2, 2, 0]);
        assert_eq!(h.retained_singletons, vec![2]);
        assert_eq!(h.fit.len() + h.holdout.len(), 15);

        let none = holdout_split(&split, 0.0, 0.0, &boundary, 1).unwrap();
        assert!(none.holdout.is_empty());
        assert_eq!(none.fit, split.training_indices());
    }

    #[test]
    fn median_boundary() {
        let c = ClassCounts::new(vec![10, 8, 4, 2]).unwrap();
        let b = HeadTailBoundary::median(&c);
        let tails: Vec<bool> = (0..4).map(|y| b.is_tail(y, c.get(y))).collect();
        assert_eq!(tails, vec![false, false, true, true]);
    }

    #[test]
    fn synthetic_task_preconditions_and_determinism() {
        let counts = exponential_profile(5, 20, 2).unwrap();
        let mut cfg = SyntheticTaskConfig { dim: 3, separation: 0.0, eval_reserve: 2, seed: 1 };
        assert!(synthetic_task(&counts, &cfg).is_err());
        cfg.separation = 5.0;
        let a = synthetic_task(&counts, &cfg).unwrap();
        let b = synthetic_task(&counts, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), counts.total() + 5 * 2);
        assert_eq!(a.class_sizes()[0], 22);
    }

    proptest! {
        #[test]
        fn exponential_is_monotone_with_exact_endpoints(k in 2usize..300, n_min in 1usize..20, extra in 0usize..500) {
            let n_max = n_min + extra;
            let c = exponential_profile(k, n_max, n_min).unwrap();
            prop_assert_eq!(c.get(0), n_max);
            prop_assert_eq!(c.get(k - 1), n_min);
            prop_assert!(c.as_slice().windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(c.as_slice().iter().all(|&n| n >= 1));
        }

        #[test]
        fn split_partitions_are_disjoint_and_match_counts(
            raw in proptest::collection::vec(0usize..12, 2..10),
            reserve in 1usize..5,
            seed in any::<u64>(),
        ) {
            prop_assume!(raw.iter().sum::<usize>() > 0);
            let counts = ClassCounts::new(raw).unwrap();
            let pool = label_only_pool(&counts, reserve + 3);
            let mut opts = SplitOptions::new(0.2, seed);
            opts.allow_truncation = true;
            let split = draw_split(&pool, &counts, &opts, None).unwrap();
            prop_assert_eq!(split.partitions.len(), pool.samples.len());
            prop_assert_eq!(split.train_counts(), counts.clone());
            let sizes = pool.class_sizes();
            for p in Partition::ALL {
                let c = split.counts_of(&split.indices(p));
                for y in 0..counts.k() {
                    prop_assert!(c.get(y) <= sizes[y]);
                }
            }

            let boundary = HeadTailBoundary::median(&counts);
            let h = holdout_split(&split, 0.5, 0.2, &boundary, seed).unwrap();
            let held = split.counts_of(&h.holdout);
            let fit = split.counts_of(&h.fit);
            for y in 0..counts.k() {
                let n = counts.get(y);
                prop_assert_eq!(held.get(y) + fit.get(y), n);
                if n >= 2 {
                    let frac = if boundary.is_tail(y, n) { 0.5 } else { 0.2 };
                    prop_assert!((held.get(y) as f64 - frac * n as f64).abs() < 1.0);
                    prop_assert!(fit.get(y) >= 1);
                }
            }
        }
    }
}
