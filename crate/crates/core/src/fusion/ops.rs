use alloc::vec::Vec;

use super::SortBy;
use crate::fmath;
use crate::math::{conv_rows, sigmoid};
use crate::{Error, Result};

/// Expert columns with rows reordered by descending confidence of one expert.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedStack {
    /// Row-major `k × columns`.
    pub values: Vec<f64>,
    pub columns: usize,
    /// `perm[r]` is the original class at sorted row `r`.
    pub perm: Vec<usize>,
}

impl SortedStack {
    pub fn k(&self) -> usize {
        self.perm.len()
    }
}

/// Stacks `p_v` (and `p_s` when present) column-wise and sorts the rows by the
/// descending confidence of the `sort_by` expert; ties keep ascending class order.
pub fn stack_and_sort(p_v: &[f64], p_s: Option<&[f64]>, sort_by: SortBy) -> Result<SortedStack> {
    let k = p_v.len();
    if let Some(p_s) = p_s {
        if p_s.len() != k {
            return Err(Error::Dimension { context: "semantic expert row", expected: k, actual: p_s.len() });
        }
    }
    let key = match (sort_by, p_s) {
        (SortBy::Visual, _) => p_v,
        (SortBy::Semantic, Some(p_s)) => p_s,
        (SortBy::Semantic, None) => {
            return Err(Error::InvalidInput("cannot sort by the semantic expert without its predictions".into()))
        }
    };
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| key[b].partial_cmp(&key[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    let columns = if p_s.is_some() { 2 } else { 1 };
    let mut values = Vec::with_capacity(k * columns);
    for &c in &perm {
        values.push(p_v[c]);
        if let Some(p_s) = p_s {
            values.push(p_s[c]);
        }
    }
    Ok(SortedStack { values, columns, perm })
}

/// Convolution over the sorted stack followed by averaging over filters.
/// `filters` holds `F` rows of `2 × columns` taps.
pub fn backbone(sorted: &SortedStack, filters: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let k = sorted.k();
    let conv = conv_rows(&sorted.values, k, sorted.columns, filters, bias)?;
    let nf = bias.len();
    let scale = 1.0 / nf as f64;
    Ok(conv.chunks(nf).map(|row| row.iter().sum::<f64>() * scale).collect())
}

/// Polynomial coefficients `c_j = head_w[j] · h + head_b[j]` (or just
/// `head_b[j]` when `head_w` is empty) and weights `w(y) = σ(Σ_j c_j n̄_y^j)`.
pub fn debias_weights(h: &[f64], nbar: &[f64], head_w: &[f64], head_b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = head_b.len();
    if !head_w.is_empty() && head_w.len() != d * h.len() {
        return Err(Error::Dimension { context: "coefficient head weights", expected: d * h.len(), actual: head_w.len() });
    }
    if nbar.len() != h.len() + 1 {
        return Err(Error::Dimension { context: "normalised counts", expected: h.len() + 1, actual: nbar.len() });
    }
    let coefs: Vec<f64> = (0..d)
        .map(|j| {
            let mut c = head_b[j];
            if !head_w.is_empty() {
                for (w, x) in head_w[j * h.len()..(j + 1) * h.len()].iter().zip(h) {
                    c += w * x;
                }
            }
            c
        })
        .collect();
    let w = nbar.iter().map(|&n| sigmoid(polynomial(&coefs, n))).collect();
    Ok((coefs, w))
}

/// `Σ_j c_j x^j` with `x^0 = 1`.
#[inline]
pub(crate) fn polynomial(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().enumerate().map(|(j, c)| c * fmath::powi(x, j)).sum()
}

/// `f_0 = w · h + b` and `λ = σ(f_0 − β)`.
pub fn lambda_head(h: &[f64], w: &[f64], b: f64, beta: f64) -> Result<(f64, f64)> {
    if w.len() != h.len() {
        return Err(Error::Dimension { context: "lambda head weights", expected: h.len(), actual: w.len() });
    }
    let f0 = b + w.iter().zip(h).map(|(w, x)| w * x).sum::<f64>();
    Ok((f0, sigmoid(f0 - beta)))
}

/// `S(y) = λ w_V(y) p_V(y) + (1 − λ) w_S(y) p_S(y)`.
pub fn fuse(p_v: &[f64], p_s: &[f64], lambda: f64, w_v: &[f64], w_s: &[f64]) -> Result<Vec<f64>> {
    let k = p_v.len();
    for (name, v) in [("semantic row", p_s), ("visual weights", w_v), ("semantic weights", w_s)] {
        if v.len() != k {
            return Err(Error::Dimension { context: name, expected: k, actual: v.len() });
        }
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput("lambda must lie in [0, 1]".into()));
    }
    Ok((0..k).map(|y| lambda * w_v[y] * p_v[y] + (1.0 - lambda) * w_s[y] * p_s[y]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sort_examples() {
        let p_v = [0.1, 0.7, 0.2];
        let p_s = [0.5, 0.2, 0.3];
        let s = stack_and_sort(&p_v, Some(&p_s), SortBy::Visual).unwrap();
        assert_eq!(s.perm, vec![1, 2, 0]);
        assert_eq!(s.values, vec![0.7, 0.2, 0.2, 0.3, 0.1, 0.5]);
        // Inverting the permutation restores both columns.
        let mut v = [0.0; 3];
        let mut sem = [0.0; 3];
        for (r, &c) in s.perm.iter().enumerate() {
            v[c] = s.values[2 * r];
            sem[c] = s.values[2 * r + 1];
        }
        assert_eq!(v, p_v);
        assert_eq!(sem, p_s);

        let sorted = stack_and_sort(&[0.6, 0.3, 0.1], Some(&p_s), SortBy::Visual).unwrap();
        assert_eq!(sorted.perm, vec![0, 1, 2]);
        let by_sem = stack_and_sort(&p_v, Some(&p_s), SortBy::Semantic).unwrap();
        assert_eq!(by_sem.perm, vec![0, 2, 1]);
        let ties = stack_and_sort(&[0.25; 4], None, SortBy::Visual).unwrap();
        assert_eq!(ties.perm, vec![0, 1, 2, 3]);
        assert!(stack_and_sort(&p_v, Some(&[0.5, 0.5]), SortBy::Visual).is_err());
    }

    #[test]
    fn backbone_shapes() {
        let p_v = [0.1, 0.3, 0.2, 0.25, 0.15];
        let s = stack_and_sort(&p_v, Some(&p_v), SortBy::Visual).unwrap();
        let h = backbone(&s, &[0.1; 12], &[0.0; 3]).unwrap();
        assert_eq!(h.len(), 4);
        let zero = backbone(&s, &[0.0; 12], &[0.0; 3]).unwrap();
        assert_eq!(zero, vec![0.0; 4]);
        let one = stack_and_sort(&[1.0], Some(&[1.0]), SortBy::Visual).unwrap();
        assert!(backbone(&one, &[0.0; 4], &[0.0]).is_err());
    }

    #[test]
    fn debias_weight_examples() {
        let h = [0.3, -0.2];
        let nbar = [1.0, 0.5, 0.1];
        let (c, w) = debias_weights(&h, &nbar, &[0.0; 4], &[0.0; 2]).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
        assert_eq!(w, vec![0.5; 3]);
        let (_, w) = debias_weights(&h, &nbar, &[], &[2.0, 0.0]).unwrap();
        for x in w {
            assert!((x - 0.880797).abs() < 1e-6);
        }
        let (_, w) = debias_weights(&h, &nbar, &[], &[0.0, -4.0]).unwrap();
        assert!(w[0] < w[1] && w[1] < w[2]);
        // n̄ = 0 still evaluates the constant term.
        let (_, w) = debias_weights(&[0.0], &[1.0, 0.0], &[], &[2.0, 1.0]).unwrap();
        assert!((w[1] - sigmoid(2.0)).abs() < 1e-15);
    }

    #[test]
    fn lambda_head_examples() {
        let h = [0.5, -1.0];
        let (_, l) = lambda_head(&h, &[0.0, 0.0], 1.3, 1.3).unwrap();
        assert_eq!(l, 0.5);
        let (_, l) = lambda_head(&h, &[0.0, 0.0], 0.0, -2.0).unwrap();
        assert!((l - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn fuse_examples() {
        let s = fuse(&[0.8, 0.2], &[0.2, 0.8], 0.5, &[1.0; 2], &[1.0; 2]).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
        let s = fuse(&[0.8, 0.2], &[0.2, 0.8], 1.0, &[0.5, 0.25], &[1.0; 2]).unwrap();
        assert_eq!(s, vec![0.4, 0.05]);
        let s = fuse(&[0.6, 0.4], &[0.3, 0.7], 0.25, &[1.0, 0.5], &[0.5, 1.0]).unwrap();
        assert!((s[0] - 0.2625).abs() < 1e-12);
        assert!((s[1] - 0.575).abs() < 1e-12);
        assert!(fuse(&[0.5, 0.5], &[1.0], 0.5, &[1.0; 2], &[1.0; 2]).is_err());
    }
}
