//! Evaluation metrics. All values are fractions in `[0, 1]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::longtail::ClassCounts;
use crate::math::argmax;
use crate::{Error, Result};

fn check_pairs(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { context: "predicted labels", expected: truth.len(), actual: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    Ok(())
}

/// Accuracy of each class `0..k`; `None` for classes without samples.
pub fn per_class_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Option<f64>>> {
    check_pairs(pred, truth)?;
    let mut hit = vec![0usize; k];
    let mut n = vec![0usize; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if t >= k {
            return Err(Error::Index { index: t, len: k });
        }
        n[t] += 1;
        hit[t] += usize::from(p == t);
    }
    Ok((0..k).map(|y| (n[y] > 0).then(|| hit[y] as f64 / n[y] as f64)).collect())
}

fn num_classes(pred: &[usize], truth: &[usize]) -> usize {
    pred.iter().chain(truth).copied().max().map_or(0, |m| m + 1)
}

/// Mean per-class accuracy over the classes present in `truth`.
pub fn acc_pc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let per = per_class_accuracy(pred, truth, num_classes(pred, truth))?;
    Ok(mean_present(&per).unwrap_or(0.0))
}

fn mean_present(v: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = v.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// `Σ_y p_train(y) · Acc(y)`.
pub fn acc_lt(pred: &[usize], truth: &[usize], p_train: &[f64]) -> Result<f64> {
    let k = p_train.len().max(num_classes(pred, truth));
    if p_train.len() < k {
        return Err(Error::Dimension { context: "training distribution", expected: k, actual: p_train.len() });
    }
    if p_train.iter().any(|&p| !(p >= 0.0)) || (p_train.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("training distribution must be non-negative and sum to 1".into()));
    }
    let per = per_class_accuracy(pred, truth, k)?;
    let mut acc = 0.0;
    for (y, (&p, a)) in p_train.iter().zip(&per).enumerate() {
        match a {
            Some(a) => acc += p * a,
            None if p > 0.0 => return Err(Error::MissingClass { class: y }),
            None => {}
        }
    }
    Ok(acc)
}

/// Harmonic mean `2ab / (a + b)`, defined as 0 when either input is 0.
pub fn acc_h(acc_ms: f64, acc_fs: f64) -> f64 {
    if acc_ms <= 0.0 || acc_fs <= 0.0 {
        return 0.0;
    }
    if acc_ms == acc_fs {
        return acc_ms;
    }
    2.0 * acc_ms * acc_fs / (acc_ms + acc_fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketThresholds {
    /// Classes with more than this many training samples are many-shot.
    pub many_above: usize,
    /// Classes with fewer than this many training samples are few-shot.
    pub few_below: usize,
}

impl Default for BucketThresholds {
    fn default() -> Self {
        Self { many_above: 100, few_below: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketedAccuracy {
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
}

/// Per-class accuracies averaged within many/medium/few buckets; empty
/// buckets are `None`.
pub fn bucketed_acc(
    pred: &[usize],
    truth: &[usize],
    counts: &ClassCounts,
    thresholds: BucketThresholds,
) -> Result<BucketedAccuracy> {
    let per = per_class_accuracy(pred, truth, counts.k())?;
    let mut buckets: [Vec<Option<f64>>; 3] = Default::default();
    for (y, a) in per.into_iter().enumerate() {
        let n = counts.get(y);
        let b = if n > thresholds.many_above {
            0
        } else if n >= thresholds.few_below {
            1
        } else {
            2
        };
        buckets[b].push(a);
    }
    Ok(BucketedAccuracy {
        many: mean_present(&buckets[0]),
        medium: mean_present(&buckets[1]),
        few: mean_present(&buckets[2]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
}

/// Equal-width confidence bins over `[1/k, 1]` (right-inclusive) of the
/// max-probability of each row, and the expected calibration error.
/// Rows are normalised to sum to 1 before taking their maximum.
pub fn reliability<R: AsRef<[f64]>>(rows: &[R], truth: &[usize], num_bins: usize) -> Result<Reliability> {
    if num_bins == 0 {
        return Err(Error::InvalidInput("need at least one reliability bin".into()));
    }
    if rows.len() != truth.len() {
        return Err(Error::Dimension { context: "reliability labels", expected: rows.len(), actual: truth.len() });
    }
    if rows.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let k = rows[0].as_ref().len();
    if k == 0 {
        return Err(Error::Empty("prediction row"));
    }
    let lo = 1.0 / k as f64;
    let width = (1.0 - lo) / num_bins as f64;
    let mut conf_sum = vec![0.0; num_bins];
    let mut hits = vec![0usize; num_bins];
    let mut n = vec![0usize; num_bins];
    for (row, &t) in rows.iter().zip(truth) {
        let row = row.as_ref();
        if row.len() != k {
            return Err(Error::Dimension { context: "reliability row", expected: k, actual: row.len() });
        }
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateScore);
        }
        let p = argmax(row);
        let conf = row[p] / total;
        let b = if width > 0.0 {
            let pos = libm::ceil((conf - lo) / width - 1e-12) as i64 - 1;
            pos.clamp(0, num_bins as i64 - 1) as usize
        } else {
            num_bins - 1
        };
        conf_sum[b] += conf;
        hits[b] += usize::from(p == t);
        n[b] += 1;
    }
    let total = rows.len() as f64;
    let mut ece = 0.0;
    let bins = (0..num_bins)
        .map(|b| {
            let (mean_confidence, accuracy) = if n[b] > 0 {
                let c = conf_sum[b] / n[b] as f64;
                let a = hits[b] as f64 / n[b] as f64;
                ece += n[b] as f64 / total * (c - a).abs();
                (Some(c), Some(a))
            } else {
                (None, None)
            };
            ReliabilityBin {
                lower: lo + b as f64 * width,
                upper: if b + 1 == num_bins { 1.0 } else { lo + (b + 1) as f64 * width },
                count: n[b],
                mean_confidence,
                accuracy,
            }
        })
        .collect();
    Ok(Reliability { bins, ece })
}

/// Confusion counts with classes reordered head-to-tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `order[i]` is the class at rank `i` (descending training count).
    pub order: Vec<usize>,
    /// `counts[i][j]`: samples of rank-`i` class predicted as rank-`j` class.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Off-diagonal mass predicted as a more frequent class (left of the
    /// diagonal) and as a less frequent class (right of it).
    pub fn off_diagonal_mass(&self) -> (usize, usize) {
        let mut left = 0;
        let mut right = 0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if j < i {
                    left += c;
                } else if j > i {
                    right += c;
                }
            }
        }
        (left, right)
    }

    /// `left / right`; infinite when no mass lies right of the diagonal.
    pub fn head_skew(&self) -> f64 {
        let (l, r) = self.off_diagonal_mass();
        if r == 0 {
            if l == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            l as f64 / r as f64
        }
    }
}

pub fn confusion_matrix(pred: &[usize], truth: &[usize], counts: &ClassCounts) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { context: "predicted labels", expected: truth.len(), actual: pred.len() });
    }
    let k = counts.k();
    let order = counts.order_by_count_desc();
    let mut rank = vec![0; k];
    for (i, &c) in order.iter().enumerate() {
        rank[c] = i;
    }
    let mut m = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::Index { index: p.max(t), len: k });
        }
        m[rank[t]][rank[p]] += 1;
    }
    Ok(ConfusionMatrix { order, counts: m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub num_bins: usize,
    pub thresholds: BucketThresholds,
    /// Tail membership for the two-level protocol; when set, `acc_ms` and
    /// `acc_fs` are the head and tail class means instead of the buckets.
    pub two_level_tail: Option<Vec<bool>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { num_bins: 10, thresholds: BucketThresholds::default(), two_level_tail: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub acc_pc: f64,
    pub acc_lt: Option<f64>,
    pub acc_ms: Option<f64>,
    pub acc_fs: Option<f64>,
    pub acc_h: Option<f64>,
    pub buckets: BucketedAccuracy,
    pub ece: f64,
    pub reliability: Vec<ReliabilityBin>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
}

/// Every metric for score rows (any non-negative scores; rows are normalised
/// for confidence) against labels. `counts` are the training counts.
pub fn evaluate<R: AsRef<[f64]>>(rows: &[R], truth: &[usize], counts: &ClassCounts, opts: &EvalOptions) -> Result<MetricsReport> {
    let k = counts.k();
    if let Some(r) = rows.iter().find(|r| r.as_ref().len() != k) {
        return Err(Error::Dimension { context: "score row", expected: k, actual: r.as_ref().len() });
    }
    let pred: Vec<usize> = rows.iter().map(|r| argmax(r.as_ref())).collect();
    let per = per_class_accuracy(&pred, truth, k)?;
    let acc_pc = mean_present(&per).unwrap_or(0.0);
    let acc_lt = match counts.distribution() {
        Ok(p) => match acc_lt(&pred, truth, &p) {
            Ok(v) => Some(v),
            Err(Error::MissingClass { .. }) => None,
            Err(e) => return Err(e),
        },
        Err(_) => None,
    };
    let buckets = bucketed_acc(&pred, truth, counts, opts.thresholds)?;
    let (acc_ms, acc_fs) = match &opts.two_level_tail {
        Some(tail) => {
            if tail.len() != k {
                return Err(Error::Dimension { context: "tail membership", expected: k, actual: tail.len() });
            }
            let head: Vec<Option<f64>> = (0..k).filter(|&y| !tail[y]).map(|y| per[y]).collect();
            let few: Vec<Option<f64>> = (0..k).filter(|&y| tail[y]).map(|y| per[y]).collect();
            (mean_present(&head), mean_present(&few))
        }
        None => (buckets.many, buckets.few),
    };
    let acc_h = match (acc_ms, acc_fs) {
        (Some(a), Some(b)) => Some(acc_h(a, b)),
        _ => None,
    };
    let rel = reliability(rows, truth, opts.num_bins)?;
    let confusion = confusion_matrix(&pred, truth, counts)?;
    Ok(MetricsReport {
        n: truth.len(),
        acc_pc,
        acc_lt,
        acc_ms,
        acc_fs,
        acc_h,
        buckets,
        ece: rel.ece,
        reliability: rel.bins,
        per_class_accuracy: per,
        confusion,
    })
}

/// Formats a fraction as a percentage with one decimal.
pub fn percent(x: f64) -> alloc::string::String {
    format!("{:.1}", 100.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn acc_pc_examples() {
        assert_eq!(acc_pc(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(acc_pc(&[0, 1, 1], &[0, 0, 1]).unwrap(), 0.75);
        // Duplicating every sample of class 0 leaves the metric unchanged.
        assert_eq!(acc_pc(&[0, 1, 0, 1, 1], &[0, 0, 0, 0, 1]).unwrap(), 0.75);
        assert!(acc_pc(&[], &[]).is_err());
    }

    #[test]
    fn acc_lt_examples() {
        let pred = [0, 0, 1, 0];
        let truth = [0, 0, 1, 1];
        assert!((acc_lt(&pred, &truth, &[0.5, 0.5]).unwrap() - acc_pc(&pred, &truth).unwrap()).abs() < 1e-15);
        assert_eq!(acc_lt(&pred, &truth, &[0.0, 1.0]).unwrap(), 0.5);
        assert!((acc_lt(&pred, &truth, &[0.9, 0.1]).unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(acc_lt(&pred, &truth, &[0.5, 0.3, 0.2]), Err(Error::MissingClass { class: 2 }));
        assert!(acc_lt(&pred, &truth, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn acc_h_examples() {
        assert_eq!(acc_h(0.4, 0.4), 0.4);
        assert!((acc_h(72.7, 0.6) - 1.19).abs() < 0.005);
        assert!((acc_h(71.5, 1.2) - 2.36).abs() < 0.005);
        assert_eq!(acc_h(0.0, 0.0), 0.0);
        assert_eq!(acc_h(0.5, 0.0), 0.0);
    }

    #[test]
    fn bucket_examples() {
        let counts = ClassCounts::new(vec![150, 150]).unwrap();
        let b = bucketed_acc(&[0, 0], &[0, 1], &counts, BucketThresholds::default()).unwrap();
        assert_eq!(b.many, Some(0.5));
        assert_eq!((b.medium, b.few), (None, None));

        let edge = ClassCounts::new(vec![20, 100, 101, 19]).unwrap();
        let b = bucketed_acc(&[0, 1, 2, 3], &[0, 1, 2, 3], &edge, BucketThresholds::default()).unwrap();
        assert_eq!((b.many, b.medium, b.few), (Some(1.0), Some(1.0), Some(1.0)));

        let counts = ClassCounts::new(vec![150, 50, 5]).unwrap();
        let pred = [0, 0, 1, 0, 0];
        let truth = [0, 0, 1, 1, 2];
        let b = bucketed_acc(&pred, &truth, &counts, BucketThresholds::default()).unwrap();
        assert_eq!((b.many, b.medium, b.few), (Some(1.0), Some(0.5), Some(0.0)));
    }

    #[test]
    fn reliability_examples() {
        // Confidences 0.9, 0.9, 0.6, 0.6 with correctness 1, 0, 1, 1.
        let rows = [[0.9, 0.1], [0.9, 0.1], [0.6, 0.4], [0.6, 0.4]];
        let truth = [0, 1, 0, 0];
        let r = reliability(&rows, &truth, 2).unwrap();
        assert!((r.ece - 0.4).abs() < 1e-12);
        assert_eq!(r.bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![2, 2]);

        let perfect = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let r = reliability(&perfect, &[0, 1], 10).unwrap();
        assert_eq!(r.ece, 0.0);
        assert_eq!(r.bins.iter().filter(|b| b.count > 0).count(), 1);

        // Calibrated: 0.75-confidence bin with 3/4 right, 1.0 bin all right.
        let rows = [[0.75, 0.25], [0.75, 0.25], [0.75, 0.25], [0.75, 0.25], [1.0, 0.0]];
        let r = reliability(&rows, &[0, 0, 0, 1, 0], 2).unwrap();
        assert!(r.ece.abs() < 1e-12);

        assert!(reliability(&rows, &[0, 0, 0, 1, 0], 0).is_err());
        let empty: [[f64; 2]; 0] = [];
        assert!(reliability(&empty, &[], 2).is_err());
    }

    #[test]
    fn confusion_examples() {
        let counts = ClassCounts::new(vec![1, 5, 3]).unwrap();
        let truth = [0, 1, 1, 2];
        let cm = confusion_matrix(&truth, &truth, &counts).unwrap();
        assert_eq!(cm.order, vec![1, 2, 0]);
        assert_eq!(cm.counts, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(cm.total(), 4);
        let cm = confusion_matrix(&[1, 1, 1, 1], &truth, &counts).unwrap();
        assert_eq!(cm.off_diagonal_mass(), (2, 0));
    }

    proptest! {
        #[test]
        fn metric_identities(
            pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..80),
            x in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
        ) {
            let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let k = 6;
            let per = per_class_accuracy(&pred, &truth, k).unwrap();
            let present: Vec<usize> = (0..k).filter(|&c| per[c].is_some()).collect();
            let mut uniform = vec![0.0; k];
            for &c in &present {
                uniform[c] = 1.0 / present.len() as f64;
            }
            let pc = acc_pc(&pred, &truth).unwrap();
            prop_assert!((acc_lt(&pred, &truth, &uniform).unwrap() - pc).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&pc));

            prop_assert!((acc_h(x, x) - x).abs() < 1e-15);
            let h = acc_h(x, y);
            prop_assert!(h <= 2.0 * x.min(y) + 1e-15);
            prop_assert!(h <= (x + y) / 2.0 + 1e-15);

            // Order invariance.
            let mut rp = pred.clone();
            let mut rt = truth.clone();
            rp.reverse();
            rt.reverse();
            prop_assert_eq!(acc_pc(&rp, &rt).unwrap(), pc);
        }

        #[test]
        fn ece_is_bounded_and_single_sample_is_gap(c in 0.5f64..=1.0, correct in any::<bool>()) {
            let row = [c, 1.0 - c];
            let truth = if correct { 0 } else { 1 };
            let truth = if c == 0.5 { 0 } else { truth };
            let r = reliability(&[row], &[truth], 10).unwrap();
            let hit = if truth == 0 { 1.0 } else { 0.0 };
            prop_assert!((r.ece - (c - hit).abs()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.ece));
        }
    }
}
