//! Transcendental functions routed through `libm` so that results are
//! bit-identical whether or not the standard library is linked.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `x^n` by repeated multiplication, with `x^0 = 1` for every `x` (including 0).
#[inline]
pub fn powi(x: f64, n: usize) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Round half away from zero (for the non-negative values used here this is
/// round-half-up).
#[inline]
pub fn round_half_up(x: f64) -> f64 {
    libm::floor(x + 0.5)
}

/// `ceil(x)` tolerant to representation error just above an integer, so that
/// `ceil(0.2 * 15)` is 3 and not 4.
#[inline]
pub fn ceil_tol(x: f64) -> f64 {
    libm::ceil(x - 1e-9)
}

/// `floor(x)` tolerant to representation error just below an integer.
#[inline]
pub fn floor_tol(x: f64) -> f64 {
    libm::floor(x + 1e-9)
}
