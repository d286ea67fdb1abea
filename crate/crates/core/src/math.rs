//! Numerically stable scalar primitives shared across the estimators.
//!
//! All transcendental functions route through here so the crate builds
//! without `std` (via `libm`) and every caller gets the same overflow-safe
//! branches.

#[cfg(feature = "std")]
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn ln_1p(x: f64) -> f64 {
    x.ln_1p()
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Logistic function, computed without evaluating `exp` of a large positive
/// argument.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, the soft rectifier. For large `x` this returns `x` plus a
/// vanishing correction instead of overflowing.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

/// `ln Σ exp(x_i)` with max-subtraction. Empty input yields `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += exp(x - max);
    }
    max + ln(sum)
}

/// Softmax restricted to entries where `available` is true; masked entries
/// get probability exactly 0. Returns `None` when nothing is available.
pub fn softmax_masked(scores: &[f64], available: &[bool]) -> Option<alloc::vec::Vec<f64>> {
    debug_assert_eq!(scores.len(), available.len());
    let mut max = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if available[i] && s > max {
            max = s;
        }
    }
    if !max.is_finite() {
        return None;
    }
    let mut out = alloc::vec![0.0; scores.len()];
    let mut sum = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        if available[i] {
            let e = exp(s - max);
            out[i] = e;
            sum += e;
        }
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
    Some(out)
}
