//! Target densities and estimands.
//!
//! A [`TargetDensity`] wraps an unnormalised log-density `log pi(theta)` on
//! `R^dim`. Everything downstream (the tempered kernels, the importance
//! weights) works exclusively in log space, so the wrapped closure may
//! return values deep in the tails without underflow, and `-inf` is a legal
//! output for points outside the support. `+inf` and NaN are not.
//!
//! The flattened densities `pi^k` explored by the samplers are required to
//! stay integrable for every rung `k` of the ladder in use. That is a
//! property of the user's density and ladder jointly; it cannot be checked
//! from inside this crate and is the caller's obligation, exactly like
//! providing a proper density in the first place.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, normal_cdf_at};

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type EstimandFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An unnormalised log-density on `R^dim`.
///
/// Cloning is cheap: the callable is shared behind an [`Arc`], which also
/// makes a target safe to use from concurrent replicate runs.
#[derive(Clone)]
pub struct TargetDensity {
    dim: usize,
    label: String,
    log_density: Arc<LogDensityFn>,
}

impl TargetDensity {
    /// Wrap an arbitrary log-density.
    ///
    /// `label` names the target in trace metadata; for built-in targets it
    /// doubles as a parseable spec (see [`parse_target`]).
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        log_density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("target dimension must be at least 1"));
        }
        Ok(TargetDensity {
            dim,
            label: label.into(),
            log_density: Arc::new(log_density),
        })
    }

    /// Evaluate `log pi` at a point. The point must have length `dim`.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim, "point dimension mismatch");
        (self.log_density)(theta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for TargetDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDensity")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Parameters of a univariate normal mixture `sum_c w_c N(mu_c, sd_c^2)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalMixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl NormalMixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let spec = NormalMixtureSpec { weights, means, sds };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::validation("mixture needs at least one component"));
        }
        if self.means.len() != n || self.sds.len() != n {
            return Err(Error::validation(format!(
                "mixture component lists disagree in length: {} weights, {} means, {} sds",
                n,
                self.means.len(),
                self.sds.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "mixture weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        if self.sds.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::validation("mixture sds must be finite and positive"));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::validation("mixture means must be finite"));
        }
        Ok(())
    }

    /// Log-density at `x`, summed stably across components.
    pub fn log_density_at(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, mu), sd)| {
                let z = (x - mu) / sd;
                w.ln() - sd.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Exact CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, mu), sd)| w * normal_cdf_at(x, *mu, *sd))
            .sum()
    }

    /// Exact mean `sum_c w_c mu_c`.
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, mu)| w * mu).sum()
    }
}

/// Univariate normal target `N(mu, sigma^2)`, evaluated as an unnormalised
/// log-density (the normalising constant is kept so tempered normalising
/// constants have a closed form in tests).
pub fn make_normal(mu: f64, sigma: f64) -> Result<TargetDensity> {
    if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::validation(format!(
            "normal target needs finite mu and positive sigma, got mu={mu}, sigma={sigma}"
        )));
    }
    let label = format!("normal({mu},{sigma})");
    let log_norm = -sigma.ln() - 0.5 * (2.0 * PI).ln();
    TargetDensity::new(1, label, move |theta: &[f64]| {
        let z = (theta[0] - mu) / sigma;
        log_norm - 0.5 * z * z
    })
}

/// Univariate normal-mixture target.
pub fn make_normal_mixture(spec: NormalMixtureSpec) -> Result<TargetDensity> {
    spec.validate()?;
    let label = if spec == benchmark_mixture_spec() {
        "mixture".to_string()
    } else {
        format!("normal-mixture({} components)", spec.weights.len())
    };
    TargetDensity::new(1, label, move |theta: &[f64]| spec.log_density_at(theta[0]))
}

/// Parameters of the built-in bimodal benchmark target:
/// `0.6 N(-8, 0.5^2) + 0.4 N(8, 0.9^2)`.
///
/// The modes sit roughly sixteen component-sds apart, so an untempered
/// random-walk chain started in one mode essentially never sees the other;
/// its exact mean is `-1.6`.
pub fn benchmark_mixture_spec() -> NormalMixtureSpec {
    NormalMixtureSpec {
        weights: vec![0.6, 0.4],
        means: vec![-8.0, 8.0],
        sds: vec![0.5, 0.9],
    }
}

/// The built-in bimodal benchmark target. See [`benchmark_mixture_spec`].
pub fn benchmark_mixture() -> TargetDensity {
    make_normal_mixture(benchmark_mixture_spec()).expect("built-in mixture spec is valid")
}

/// Parse a target spec string: `normal(mu,sigma)` or `mixture`.
pub fn parse_target(s: &str) -> Result<TargetDensity> {
    let s = s.trim();
    if s == "mixture" {
        return Ok(benchmark_mixture());
    }
    if let Some(args) = s.strip_prefix("normal(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::validation(format!(
                "normal target takes two arguments, got `{s}`"
            )));
        }
        let mu: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad mu in `{s}`")))?;
        let sigma: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad sigma in `{s}`")))?;
        return make_normal(mu, sigma);
    }
    Err(Error::validation(format!(
        "unknown target `{s}` (expected `normal(mu,sigma)` or `mixture`)"
    )))
}

/// A scalar function of the sampled point, the `h` whose expectation under
/// the target is being estimated.
#[derive(Clone)]
pub struct Estimand {
    label: String,
    h: Arc<EstimandFn>,
}

impl Estimand {
    pub fn new(label: impl Into<String>, h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Estimand {
            label: label.into(),
            h: Arc::new(h),
        }
    }

    /// First coordinate of the point.
    pub fn identity() -> Self {
        Estimand::new("identity", |theta: &[f64]| theta[0])
    }

    /// Indicator of `a <= theta[0] <= b`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(Error::validation(format!(
                "indicator bounds must be finite with a <= b, got [{a}, {b}]"
            )));
        }
        Ok(Estimand::new(format!("indicator:{a},{b}"), move |theta: &[f64]| {
            if theta[0] >= a && theta[0] <= b {
                1.0
            } else {
                0.0
            }
        }))
    }

    /// Parse an estimand spec string: `identity` or `indicator:a,b`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Estimand::identity());
        }
        if let Some(args) = s.strip_prefix("indicator:") {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::validation(format!(
                    "indicator takes two bounds, got `{s}`"
                )));
            }
            let a: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("bad lower bound in `{s}`")))?;
            let b: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("bad upper bound in `{s}`")))?;
            return Estimand::indicator(a, b);
        }
        Err(Error::validation(format!(
            "unknown estimand `{s}` (expected `identity` or `indicator:a,b`)"
        )))
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        (self.h)(theta)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Estimand").field("label", &self.label).finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standard_normal_at_origin() {
        let t = make_normal(0.0, 1.0).unwrap();
        assert_relative_eq!(t.log_density(&[0.0]), -0.5 * (2.0 * PI).ln(), max_relative = 1e-15);
    }

    #[test]
    fn normal_log_density_hand_value() {
        // N(2, 3^2) at 5 is one sd from the mean: -ln(3) - ln(2 pi)/2 - 1/2.
        let t = make_normal(2.0, 3.0).unwrap();
        let expect = -0.5 * (2.0 * PI * 9.0).ln() - 0.5;
        assert_relative_eq!(t.log_density(&[5.0]), expect, max_relative = 1e-15);
        // Mode one sd away on either side is symmetric.
        assert_relative_eq!(t.log_density(&[-1.0]), expect, max_relative = 1e-15);
    }

    #[test]
    fn normal_rejects_bad_sigma() {
        assert!(make_normal(0.0, 0.0).is_err());
        assert!(make_normal(0.0, -1.0).is_err());
        assert!(make_normal(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn mixture_log_density_at_left_mode() {
        // At theta = -8 the right component sits ~158 nats lower, so the
        // value is the left component alone to far beyond double precision.
        let t = benchmark_mixture();
        let expect = 0.6f64.ln() - 0.5f64.ln() - 0.5 * (2.0 * PI).ln();
        assert_relative_eq!(t.log_density(&[-8.0]), expect, max_relative = 1e-12);
    }

    #[test]
    fn mixture_log_density_matches_direct_sum_between_modes() {
        // At theta = 0 both components are representable, so the naive sum
        // is an independent check of the stable evaluation.
        let spec = benchmark_mixture_spec();
        let direct = {
            let d = |x: f64, mu: f64, sd: f64| {
                (-0.5 * ((x - mu) / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt())
            };
            (0.6 * d(0.0, -8.0, 0.5) + 0.4 * d(0.0, 8.0, 0.9)).ln()
        };
        assert_relative_eq!(spec.log_density_at(0.0), direct, max_relative = 1e-12);
    }

    #[test]
    fn single_component_mixture_equals_normal() {
        let spec = NormalMixtureSpec::new(vec![1.0], vec![0.7], vec![2.2]).unwrap();
        let mix = make_normal_mixture(spec).unwrap();
        let norm = make_normal(0.7, 2.2).unwrap();
        for x in [-5.0, -0.3, 0.7, 1.4, 9.0] {
            assert_relative_eq!(mix.log_density(&[x]), norm.log_density(&[x]), max_relative = 1e-13);
        }
    }

    #[test]
    fn mixture_spec_validation() {
        assert!(NormalMixtureSpec::new(vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(NormalMixtureSpec::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(NormalMixtureSpec::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(NormalMixtureSpec::new(vec![1.2, -0.2], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn mixture_mean_and_cdf() {
        let spec = benchmark_mixture_spec();
        assert_relative_eq!(spec.mean(), -1.6, max_relative = 1e-15);
        assert_relative_eq!(spec.cdf(f64::INFINITY), 1.0, max_relative = 1e-15);
        assert!(spec.cdf(-100.0) < 1e-300);
        // All of the left component and half of the right sits below 8.
        assert_relative_eq!(spec.cdf(8.0), 0.6 + 0.2, max_relative = 1e-12);
    }

    #[test]
    fn parse_target_roundtrip() {
        let t = parse_target("normal(-1.5,0.25)").unwrap();
        assert_eq!(t.label(), "normal(-1.5,0.25)");
        let m = parse_target("mixture").unwrap();
        assert_eq!(m.label(), "mixture");
        assert!(parse_target("cauchy(0,1)").is_err());
        assert!(parse_target("normal(0)").is_err());
        assert!(parse_target("normal(a,b)").is_err());
    }

    #[test]
    fn estimand_parse_and_eval() {
        let id = Estimand::parse("identity").unwrap();
        assert_eq!(id.eval(&[3.25]), 3.25);
        let ind = Estimand::parse("indicator:-1,2").unwrap();
        assert_eq!(ind.eval(&[0.0]), 1.0);
        assert_eq!(ind.eval(&[-1.0]), 1.0);
        assert_eq!(ind.eval(&[2.0]), 1.0);
        assert_eq!(ind.eval(&[2.1]), 0.0);
        assert!(Estimand::parse("indicator:2,-1").is_err());
        assert!(Estimand::parse("moment:2").is_err());
    }
}
