//! Small numeric utilities shared across the crate: stable log-space sums,
//! the standard normal CDF, and the quadrature / root-finding routines used
//! by the variance analysis.

use crate::error::{Error, Result};

/// `ln(exp(a) + exp(b))` without overflow.
///
/// Either argument may be `-inf` (an empty term); the result is then the
/// other argument.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum_i exp(x_i))` without overflow. Returns `-inf` for an empty slice
/// or a slice of `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of `N(mu, sigma^2)` at `x`.
pub fn normal_cdf_at(x: f64, mu: f64, sigma: f64) -> f64 {
    normal_cdf((x - mu) / sigma)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps || (b - a) < 1e-14 * (a.abs() + b.abs() + 1.0) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::numeric(format!(
            "adaptive quadrature failed to converge on [{a}, {b}] (residual {delta:e})"
        )));
    }
    let l = adapt_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?;
    let r = adapt_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// `tol` is an absolute tolerance on the whole integral. The interval is
/// first cut into `panels` equal pieces so that narrow features away from
/// the midpoint are not stepped over, then each panel is refined
/// recursively. Fails with a numeric error if the recursion bottoms out
/// before the tolerance is met.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, panels: usize) -> Result<f64> {
    assert!(b > a && tol > 0.0 && panels > 0);
    let width = (b - a) / panels as f64;
    let eps = tol / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let pa = a + i as f64 * width;
        let pb = pa + width;
        let pm = 0.5 * (pa + pb);
        let (fa, fm, fb) = (f(pa), f(pm), f(pb));
        let whole = simpson(fa, fm, fb, width);
        total += adapt_step(f, pa, pb, fa, fm, fb, whole, eps, 48)?;
    }
    if !total.is_finite() {
        return Err(Error::numeric("quadrature produced a non-finite value".to_string()));
    }
    Ok(total)
}

/// Golden-section search for the minimiser of a unimodal `f` on `[a, b]`,
/// run until the bracket is narrower than `tol_x`.
pub fn golden_section_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol_x: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol_x {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection root of `f` on `[a, b]`; the endpoints must bracket a sign
/// change. Runs until the bracket is narrower than `tol_x`.
pub fn bisect(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol_x: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numeric(format!(
            "bisection endpoints do not bracket a root: f({a}) = {fa:e}, f({b}) = {fb:e}"
        )));
    }
    while (b - a) > tol_x {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn log_add_exp_matches_naive_in_safe_range() {
        assert_relative_eq!(log_add_exp(0.0, 0.0), 2.0f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(log_add_exp(1.0, -3.0), (1.0f64.exp() + (-3.0f64).exp()).ln(), max_relative = 1e-15);
    }

    #[test]
    fn log_add_exp_handles_empty_terms() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_add_exp(2.5, f64::NEG_INFINITY), 2.5);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.5), 2.5);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        // Would overflow if exponentiated directly.
        let got = log_sum_exp(&[1000.0, 1000.0]);
        assert_relative_eq!(got, 1000.0 + 2.0f64.ln(), max_relative = 1e-15);
        let got = log_sum_exp(&[-1000.0, -1000.0, -1000.0]);
        assert_relative_eq!(got, -1000.0 + 3.0f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn log_sum_exp_empty_is_neg_inf() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-15);
        // Phi(1.96) from standard tables.
        assert_relative_eq!(normal_cdf(1.959_963_984_540_054), 0.975, max_relative = 1e-12);
        assert_relative_eq!(normal_cdf(-8.0) + normal_cdf(8.0), 1.0, max_relative = 1e-12);
        assert!(normal_cdf(-40.0) >= 0.0 && normal_cdf(-40.0) < 1e-300);
    }

    #[test]
    fn simpson_integrates_gaussian_to_tolerance() {
        let f = |x: f64| (-0.5 * x * x).exp();
        let got = adaptive_simpson(&f, -40.0, 40.0, 1e-12, 16).unwrap();
        assert_relative_eq!(got, (2.0 * PI).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn simpson_integrates_polynomial_exactly() {
        let f = |x: f64| 3.0 * x * x;
        let got = adaptive_simpson(&f, 0.0, 2.0, 1e-12, 4).unwrap();
        assert_relative_eq!(got, 8.0, max_relative = 1e-13);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let f = |x: f64| (x - 0.37).powi(2);
        let xmin = golden_section_min(&f, 0.0, 1.0, 1e-10);
        assert!((xmin - 0.37).abs() < 1e-8);
    }

    #[test]
    fn bisection_finds_root() {
        let f = |x: f64| x * x - 2.0;
        let root = bisect(&f, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(root, 2.0f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn bisection_rejects_unbracketed_interval() {
        let f = |x: f64| x * x + 1.0;
        assert!(bisect(&f, -1.0, 1.0, 1e-12).is_err());
    }
}
