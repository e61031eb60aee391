use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    /// Row-major, same shape as the weight matrix.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// `weights · input + bias` for a `(n_out × n_in)` weight matrix.
pub fn dense_layer(input: &[f64], weights: &Matrix, bias: &[f64]) -> Result<Vec<f64>> {
    check_dense(input, weights, bias)?;
    Ok((0..weights.rows())
        .map(|o| {
            let mut acc = bias[o];
            for (w, x) in weights.row(o).iter().zip(input) {
                acc += w * x;
            }
            acc
        })
        .collect())
}

pub fn dense_layer_backward(input: &[f64], weights: &Matrix, grad_out: &[f64]) -> Result<DenseGrads> {
    if grad_out.len() != weights.rows() {
        return Err(Error::Dimension {
            context: "dense upstream gradient",
            expected: weights.rows(),
            actual: grad_out.len(),
        });
    }
    if input.len() != weights.cols() {
        return Err(Error::Dimension {
            context: "dense input",
            expected: weights.cols(),
            actual: input.len(),
        });
    }
    let mut g_in = vec![0.0; input.len()];
    let mut g_w = Vec::with_capacity(weights.rows() * weights.cols());
    for (o, &g) in grad_out.iter().enumerate() {
        for (i, &x) in input.iter().enumerate() {
            g_w.push(g * x);
            g_in[i] += g * weights.get(o, i);
        }
    }
    Ok(DenseGrads { input: g_in, weights: g_w, bias: grad_out.to_vec() })
}

fn check_dense(input: &[f64], weights: &Matrix, bias: &[f64]) -> Result<()> {
    if input.len() != weights.cols() {
        return Err(Error::Dimension {
            context: "dense input",
            expected: weights.cols(),
            actual: input.len(),
        });
    }
    if bias.len() != weights.rows() {
        return Err(Error::Dimension {
            context: "dense bias",
            expected: weights.rows(),
            actual: bias.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2x2Grads {
    /// Row-major gradient with the input's shape.
    pub input: Vec<f64>,
    /// One row of taps per filter, same layout as the filters.
    pub filters: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Valid convolution of a `k × cols` input with `F` filters of shape
/// `2 × cols`, sliding over rows with stride 1. Filter `f` occupies
/// `filters[f * 2 * cols ..][..2 * cols]`, with tap `(a, c)` at `a * cols + c`.
/// Output is `(k − 1) × F`, row-major.
pub fn conv_rows(input: &[f64], k: usize, cols: usize, filters: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let n_filters = check_conv(input, k, cols, filters, bias)?;
    let taps = 2 * cols;
    let mut out = Vec::with_capacity((k - 1) * n_filters);
    for r in 0..k - 1 {
        let window = &input[r * cols..(r + 2) * cols];
        for f in 0..n_filters {
            let mut acc = bias[f];
            for (w, x) in filters[f * taps..(f + 1) * taps].iter().zip(window) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
    Ok(out)
}

pub fn conv_rows_backward(
    input: &[f64],
    k: usize,
    cols: usize,
    filters: &[f64],
    grad_out: &[f64],
) -> Result<Conv2x2Grads> {
    let taps = 2 * cols;
    if taps == 0 || filters.len() % taps != 0 || filters.is_empty() {
        return Err(Error::InvalidInput("filter taps must be a positive multiple of 2 * cols".into()));
    }
    let n_filters = filters.len() / taps;
    if k < 2 || input.len() != k * cols {
        return Err(Error::InvalidInput("convolution input must have at least 2 rows".into()));
    }
    if grad_out.len() != (k - 1) * n_filters {
        return Err(Error::Dimension {
            context: "conv upstream gradient",
            expected: (k - 1) * n_filters,
            actual: grad_out.len(),
        });
    }
    let mut g_in = vec![0.0; input.len()];
    let mut g_f = vec![0.0; filters.len()];
    let mut g_b = vec![0.0; n_filters];
    for r in 0..k - 1 {
        let base = r * cols;
        for f in 0..n_filters {
            let g = grad_out[r * n_filters + f];
            g_b[f] += g;
            for t in 0..taps {
                g_f[f * taps + t] += g * input[base + t];
                g_in[base + t] += g * filters[f * taps + t];
            }
        }
    }
    Ok(Conv2x2Grads { input: g_in, filters: g_f, bias: g_b })
}

fn check_conv(input: &[f64], k: usize, cols: usize, filters: &[f64], bias: &[f64]) -> Result<usize> {
    if k < 2 {
        return Err(Error::InvalidInput("convolution input must have at least 2 rows".into()));
    }
    if cols == 0 || input.len() != k * cols {
        return Err(Error::Dimension {
            context: "conv input",
            expected: k * cols,
            actual: input.len(),
        });
    }
    let taps = 2 * cols;
    if filters.is_empty() || filters.len() % taps != 0 {
        return Err(Error::InvalidInput("filter taps must be a positive multiple of 2 * cols".into()));
    }
    let n_filters = filters.len() / taps;
    if bias.len() != n_filters {
        return Err(Error::Dimension {
            context: "conv bias",
            expected: n_filters,
            actual: bias.len(),
        });
    }
    Ok(n_filters)
}

/// 2x2 valid convolution over a `k × 2` matrix (see [`conv_rows`]).
pub fn conv2x2(input: &Matrix, filters: &[[f64; 4]], bias: &[f64]) -> Result<Matrix> {
    if input.cols() != 2 {
        return Err(Error::Dimension { context: "conv2x2 input columns", expected: 2, actual: input.cols() });
    }
    let flat: Vec<f64> = filters.iter().flatten().copied().collect();
    let out = conv_rows(input.as_slice(), input.rows(), 2, &flat, bias)?;
    Matrix::new(input.rows() - 1, filters.len(), out)
}

pub fn conv2x2_backward(input: &Matrix, filters: &[[f64; 4]], grad_out: &Matrix) -> Result<Conv2x2Grads> {
    let flat: Vec<f64> = filters.iter().flatten().copied().collect();
    conv_rows_backward(input.as_slice(), input.rows(), input.cols(), &flat, grad_out.as_slice())
}

/// Mean over filters of each row of a `(k − 1) × F` activation.
pub fn avg_pool_filters(input: &Matrix) -> Vec<f64> {
    let f = input.cols() as f64;
    (0..input.rows())
        .map(|r| input.row(r).iter().sum::<f64>() / f)
        .collect()
}

/// Spreads each upstream gradient as `1/F` over that row's filters.
pub fn avg_pool_filters_backward(grad_h: &[f64], n_filters: usize) -> Result<Vec<f64>> {
    if n_filters == 0 {
        return Err(Error::Empty("filter set"));
    }
    let scale = 1.0 / n_filters as f64;
    Ok(grad_h
        .iter()
        .flat_map(|&g| core::iter::repeat(g * scale).take(n_filters))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{finite_diff_grad, relative_error};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn dense_identity_and_bias() {
        let x = [0.3, -1.2, 4.0];
        let id = Matrix::identity(3).unwrap();
        assert_eq!(dense_layer(&x, &id, &[0.0; 3]).unwrap(), x.to_vec());
        let zero = Matrix::zeros(2, 3).unwrap();
        assert_eq!(dense_layer(&x, &zero, &[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
        assert!(dense_layer(&x[..2], &id, &[0.0; 3]).is_err());
    }

    #[test]
    fn dense_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(11);
        // 3 inputs -> 2 outputs; loss = c · y.
        let x = rand_vec(&mut rng, 3);
        let w = rand_vec(&mut rng, 6);
        let b = rand_vec(&mut rng, 2);
        let c = rand_vec(&mut rng, 2);
        let loss = |x: &[f64], w: &[f64], b: &[f64]| -> f64 {
            let m = Matrix::new(2, 3, w.to_vec()).unwrap();
            dense_layer(x, &m, b).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum()
        };
        let m = Matrix::new(2, 3, w.clone()).unwrap();
        let g = dense_layer_backward(&x, &m, &c).unwrap();
        let fd_x = finite_diff_grad(|v| Ok(loss(v, &w, &b)), &x, 1e-5).unwrap();
        let fd_w = finite_diff_grad(|v| Ok(loss(&x, v, &b)), &w, 1e-5).unwrap();
        let fd_b = finite_diff_grad(|v| Ok(loss(&x, &w, v)), &b, 1e-5).unwrap();
        assert!(relative_error(&g.input, &fd_x) < 1e-6);
        assert!(relative_error(&g.weights, &fd_w) < 1e-6);
        assert!(relative_error(&g.bias, &fd_b) < 1e-6);
    }

    #[test]
    fn conv_examples() {
        let c = 0.7;
        let input = Matrix::new(4, 2, vec![c; 8]).unwrap();
        let out = conv2x2(&input, &[[1.0; 4]], &[0.0]).unwrap();
        assert_eq!(out.rows(), 3);
        for r in 0..3 {
            assert!((out.get(r, 0) - 4.0 * c).abs() < 1e-15);
        }
        let input = Matrix::new(3, 2, vec![0.5, 0.1, 0.3, 0.2, 0.2, 0.7]).unwrap();
        let out = conv2x2(&input, &[[1.0, -1.0, 0.0, 0.0]], &[0.0]).unwrap();
        for r in 0..2 {
            assert!((out.get(r, 0) - (input.get(r, 0) - input.get(r, 1))).abs() < 1e-15);
        }
        let one_row = Matrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(conv2x2(&one_row, &[[1.0; 4]], &[0.0]).is_err());
    }

    #[test]
    fn conv_row_count_is_k_minus_one() {
        for k in 2..20 {
            let input = Matrix::zeros(k, 2).unwrap();
            let out = conv2x2(&input, &[[0.1; 4], [0.2; 4]], &[0.0, 0.0]).unwrap();
            assert_eq!(out.rows(), k - 1);
            assert_eq!(out.cols(), 2);
        }
    }

    #[test]
    fn conv_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(5);
        let (k, nf) = (5, 3);
        let x = rand_vec(&mut rng, k * 2);
        let filt = rand_vec(&mut rng, nf * 4);
        let b = rand_vec(&mut rng, nf);
        let c = rand_vec(&mut rng, (k - 1) * nf);
        let loss = |x: &[f64], f: &[f64], b: &[f64]| -> f64 {
            conv_rows(x, k, 2, f, b).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum()
        };
        let g = conv_rows_backward(&x, k, 2, &filt, &c).unwrap();
        let fd_x = finite_diff_grad(|v| Ok(loss(v, &filt, &b)), &x, 1e-5).unwrap();
        let fd_f = finite_diff_grad(|v| Ok(loss(&x, v, &b)), &filt, 1e-5).unwrap();
        let fd_b = finite_diff_grad(|v| Ok(loss(&x, &filt, v)), &b, 1e-5).unwrap();
        assert!(relative_error(&g.input, &fd_x) < 1e-6);
        assert!(relative_error(&g.filters, &fd_f) < 1e-6);
        assert!(relative_error(&g.bias, &fd_b) < 1e-6);
    }

    #[test]
    fn avg_pool_examples_and_gradient() {
        let col = Matrix::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(avg_pool_filters(&col), vec![1.0, 2.0, 3.0]);
        let row = Matrix::new(1, 2, vec![1.0, 3.0]).unwrap();
        assert_eq!(avg_pool_filters(&row), vec![2.0]);

        let mut rng = rng_from_seed(9);
        let x = rand_vec(&mut rng, 4 * 3);
        let c = rand_vec(&mut rng, 4);
        let loss = |v: &[f64]| -> crate::Result<f64> {
            let m = Matrix::new(4, 3, v.to_vec())?;
            Ok(avg_pool_filters(&m).iter().zip(&c).map(|(h, c)| h * c).sum())
        };
        let g = avg_pool_filters_backward(&c, 3).unwrap();
        let fd = finite_diff_grad(loss, &x, 1e-5).unwrap();
        assert!(relative_error(&g, &fd) < 1e-6);
        for r in 0..4 {
            for f in 0..3 {
                assert!((g[r * 3 + f] - c[r] / 3.0).abs() < 1e-15);
            }
        }
    }
}
