use alloc::vec::Vec;

use crate::{Error, Result};

/// Central finite differences `(f(x + eps e_i) − f(x − eps e_i)) / (2 eps)`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe)?;
        probe[i] = x[i] - eps;
        let down = f(&probe)?;
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-8)`: the relative error used for gradient checks.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    libm::sqrt(diff) / libm::sqrt(na).max(libm::sqrt(nb)).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn square_derivative() {
        let g = finite_diff_grad(|x| Ok(x[0] * x[0]), &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_grad(|_| Ok(4.2), &[1.0, -2.0, 3.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn linear_function_is_exact() {
        let a = [0.5, -1.25, 3.0, 2.0];
        let x = [0.1, 0.2, -0.3, 7.0];
        let g = finite_diff_grad(|v| Ok(v.iter().zip(&a).map(|(v, a)| v * a).sum()), &x, 1e-5).unwrap();
        for (g, a) in g.iter().zip(&a) {
            assert!((g - a).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let r = finite_diff_grad(|v| Ok(libm::log(v[0])), &[0.0], 1e-5);
        assert!(r.is_err());
        assert!(finite_diff_grad(|_| Ok(0.0), &[0.0], 0.0).is_err());
        let r = finite_diff_grad(|_| Err(Error::DegenerateScore), &[0.0], 1e-5);
        assert_eq!(r, Err(Error::DegenerateScore));
    }
}
