//! Diagnostics and design analysis: how much tempering a normal target
//! tolerates, distribution-level error of weighted samples, autocorrelation
//! ESS, and the bimodal benchmark comparing combination rules end to end.
//!
//! # Choosing an exponent for a normal target
//!
//! Drawing from `pi^k` (normalised) and weighting back to `pi = N(mu,
//! sigma^2)` with unnormalised weights `w = pi / pi_k` gives an unbiased
//! estimator of the mean whose variance per sample is, writing the moments
//! out,
//!
//! ```text
//! T V(k) = Z_k * integral pi(x)^(2-k) x^2 dx  -  mu^2,
//! Z_k = integral pi(x)^k dx.
//! ```
//!
//! [`is_variance`] evaluates this by quadrature. Its minimiser has a closed
//! form ([`k_star`]): tempering *helps* — the optimum is below 1 — and the
//! flatter the target relative to its mean (larger `sigma/|mu|`), the more
//! it helps, down to `k = 1/2` for a centred target. [`k_minus`] finds how
//! far below the optimum one can temper before doing worse than not
//! tempering at all, and [`exponent_table`] tabulates both over a grid of
//! `sigma/mu` ratios. All three depend on `(mu, sigma)` only through the
//! ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    bin_by_temperature, combine, lambda_log_weights, lambda_star, log_importance_weights,
    naive_lambda, remark_bound_gap, st_lambda, Method,
};
use crate::ladder::TemperatureLadder;
use crate::numeric::{adaptive_simpson, bisect, log_sum_exp};
use crate::sampler::{
    adapt_pseudo_prior, st_run, AdaptConfig, InitPoint, KernelConfig, StConfig, StepRule,
};
use crate::target::{benchmark_mixture, benchmark_mixture_spec, Estimand};

/// The `sigma/mu` grid used by the exponent table.
pub const TABLE_RATIOS: [f64; 5] = [0.0625, 0.25, 1.0, 4.0, 16.0];

fn check_mu_sigma(mu: f64, sigma: f64) -> Result<()> {
    if !mu.is_finite() {
        return Err(Error::validation(format!("mean must be finite, got {mu}")));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::validation(format!("sd must be a positive number, got {sigma}")));
    }
    Ok(())
}

/// Variance-optimal tempering exponent for estimating the mean of
/// `N(mu, sigma^2)` by importance sampling from `pi^k`.
///
/// `1/2` for `mu = 0`; otherwise, with `r = sigma/|mu|`,
/// `3/2 + r^2 - sqrt(1 + 8 r^2 + 4 r^4) / 2`. Always in `(0, 1)`.
pub fn k_star(mu: f64, sigma: f64) -> Result<f64> {
    check_mu_sigma(mu, sigma)?;
    if mu == 0.0 {
        return Ok(0.5);
    }
    let r2 = (sigma / mu) * (sigma / mu);
    Ok(1.5 + r2 - 0.5 * (1.0 + 8.0 * r2 + 4.0 * r2 * r2).sqrt())
}

/// Integrate with an absolute tolerance calibrated to the integral's own
/// magnitude: a cheap first pass estimates the scale, a second pass
/// refines to `rel` of it.
fn integrate_rel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> Result<f64> {
    let rough = adaptive_simpson(&f, a, b, 1e-4, 32)?;
    let tol = (rough.abs() * rel).max(1e-300);
    adaptive_simpson(&f, a, b, tol, 64)
}

/// Per-sample variance (times `1/t`) of the unnormalised importance
/// estimator of the mean of `N(mu, sigma^2)` when sampling from `pi^k`,
/// for `0 < k <= 1`. At `k = 1` this is exactly `sigma^2 / t`.
pub fn is_variance(k: f64, mu: f64, sigma: f64, t: usize) -> Result<f64> {
    check_mu_sigma(mu, sigma)?;
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::validation(format!(
            "tempering exponent must lie in (0, 1], got {k}"
        )));
    }
    if t == 0 {
        return Err(Error::validation("sample count must be positive"));
    }
    let sigma2 = sigma * sigma;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    let log_pi = move |x: f64| log_norm - (x - mu) * (x - mu) / (2.0 * sigma2);

    // pi^k has sd sigma/sqrt(k); pi^(2-k) is tighter than pi. 40 sds of
    // the widest factor is far past where either integrand is representable.
    let half_width = 40.0 * sigma / k.sqrt();
    let (a, b) = (mu - half_width, mu + half_width);
    let z_k = integrate_rel(|x| (k * log_pi(x)).exp(), a, b, 1e-10)?;
    let second = integrate_rel(|x| ((2.0 - k) * log_pi(x)).exp() * x * x, a, b, 1e-10)?;
    Ok((z_k * second - mu * mu) / t as f64)
}

/// Smallest exponent that still beats (well, ties) no tempering: the root
/// of `V(k) = V(1)` below [`k_star`]. Tempering anywhere in
/// `[k_minus, 1]` has variance at most that of sampling `pi` directly.
pub fn k_minus(mu: f64, sigma: f64) -> Result<f64> {
    let ks = k_star(mu, sigma)?;
    let v1 = is_variance(1.0, mu, sigma, 1)?;
    let g = |k: f64| match is_variance(k, mu, sigma, 1) {
        Ok(v) => v - v1,
        Err(_) => f64::INFINITY, // only reachable as k -> 0 underflows
    };
    // V blows up as k -> 0+, so walk the lower bracket down until the
    // sign flips, then bisect.
    let mut lo = ks / 2.0;
    let mut tries = 0;
    while g(lo) <= 0.0 {
        lo /= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::numeric(
                "no variance crossing below the optimal exponent; this should be impossible \
                 for a normal target",
            ));
        }
    }
    bisect(&g, lo, ks, 1e-8)
}

/// One row of the exponent table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentRow {
    /// `sigma / mu`.
    pub ratio: f64,
    pub k_star: f64,
    pub k_minus: f64,
    /// `V(1) / V(k_star)`: variance factor saved by tempering optimally.
    pub gain: f64,
}

/// Tabulate [`k_star`], [`k_minus`], and the variance gain over a grid of
/// `sigma/mu` ratios (computed at `mu = 1`, which is no loss: all three
/// columns depend only on the ratio).
pub fn exponent_table(ratios: &[f64]) -> Result<Vec<ExponentRow>> {
    if ratios.is_empty() {
        return Err(Error::validation("ratio grid must be nonempty"));
    }
    ratios
        .iter()
        .map(|&r| {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::validation(format!(
                    "sigma/mu ratios must be positive numbers, got {r}"
                )));
            }
            let ks = k_star(1.0, r)?;
            Ok(ExponentRow {
                ratio: r,
                k_star: ks,
                k_minus: k_minus(1.0, r)?,
                gain: is_variance(1.0, 1.0, r, 1)? / is_variance(ks, 1.0, r, 1)?,
            })
        })
        .collect()
}

/// Kolmogorov–Smirnov distance between a weighted sample and a reference
/// CDF: the largest gap between the weighted empirical CDF and `cdf`,
/// checked from both sides at every sample point.
///
/// Weights are given as logs and normalised internally; `-inf` entries are
/// zero-weight points and contribute nothing. `cdf` must be a proper CDF;
/// that is not checked.
pub fn weighted_ks<F: Fn(f64) -> f64>(samples: &[f64], log_weights: &[f64], cdf: F) -> Result<f64> {
    if samples.len() != log_weights.len() {
        return Err(Error::validation(format!(
            "{} samples but {} weights",
            samples.len(),
            log_weights.len()
        )));
    }
    if samples.is_empty() {
        return Err(Error::validation("distribution distance needs at least one sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("samples must be finite"));
    }
    if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::validation("log weights must not be NaN or +inf"));
    }
    let total = log_sum_exp(log_weights);
    if total == f64::NEG_INFINITY {
        return Err(Error::validation("all weights are zero"));
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].partial_cmp(&samples[b]).unwrap());

    let mut d: f64 = 0.0;
    let mut cum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let x = samples[order[i]];
        let below = cum;
        while i < order.len() && samples[order[i]] == x {
            cum += (log_weights[order[i]] - total).exp();
            i += 1;
        }
        let f = cdf(x);
        d = d.max((f - below).abs()).max((cum - f).abs());
    }
    Ok(d)
}

/// Autocorrelation diagnostics for a scalar chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub len: usize,
    /// `len / max(1 + 2 * sum(rho), 1)`, always in `(0, len]`.
    pub ess: f64,
    /// Estimated autocorrelations `rho(1..=truncated_at)`, the ones summed.
    pub rho: Vec<f64>,
    /// Number of lags summed before truncation kicked in.
    pub truncated_at: usize,
}

/// Autocorrelation-based ESS of a scalar series.
///
/// Lag-`l` autocovariance is `sum (x_t - xbar)(x_{t+l} - xbar) / (len - l)`;
/// the autocorrelation sum is truncated at the first lag where
/// `rho(l) + rho(l+1)` turns negative (noise dominates beyond that), or at
/// `max_lag`, whichever comes first.
pub fn ess_autocorr(series: &[f64], max_lag: usize) -> Result<SeriesDiagnostics> {
    let t = series.len();
    if t < 3 {
        return Err(Error::validation(format!(
            "autocorrelation ess needs at least 3 points, got {t}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("series entries must be finite"));
    }
    if max_lag == 0 {
        return Err(Error::validation("max_lag must be at least 1"));
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let gamma = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..t - lag {
            s += (series[i] - mean) * (series[i + lag] - mean);
        }
        s / (t - lag) as f64
    };
    let g0 = gamma(0);
    if g0 <= 0.0 {
        return Err(Error::validation("series is constant; its ess is undefined"));
    }

    let limit = max_lag.min(t - 2);
    let mut rho = Vec::new();
    let mut sum = 0.0;
    let mut lag = 1;
    while lag <= limit {
        let r = gamma(lag) / g0;
        let r_next = gamma(lag + 1) / g0;
        if r + r_next < 0.0 {
            break;
        }
        rho.push(r);
        sum += r;
        lag += 1;
    }
    let truncated_at = rho.len();
    let ess = t as f64 / (1.0 + 2.0 * sum).max(1.0);
    Ok(SeriesDiagnostics { len: t, ess, rho, truncated_at })
}

/// Configuration for the bimodal benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureBenchConfig {
    pub replicates: usize,
    /// Iterations per replicate chain.
    pub iters: usize,
    /// Fraction of each chain discarded, in `[0, 1)`.
    pub burn_in_frac: f64,
    pub ladder: TemperatureLadder,
    pub base_step: f64,
    pub step_rule: StepRule,
    pub temp_move_prob: f64,
    /// Length of each pseudo-prior adaptation stage.
    pub adapt_stage_iters: usize,
    pub seed: u64,
}

impl Default for MixtureBenchConfig {
    fn default() -> Self {
        MixtureBenchConfig {
            replicates: 20,
            iters: 50_000,
            burn_in_frac: 0.1,
            ladder: TemperatureLadder::truncated_geometric(10, 0.1)
                .expect("valid default ladder"),
            base_step: 2.5,
            step_rule: StepRule::InverseSqrtK,
            temp_move_prob: 0.2,
            adapt_stage_iters: 20_000,
            seed: 0,
        }
    }
}

impl MixtureBenchConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::validation("benchmark needs at least one replicate"));
        }
        if self.iters < 10 {
            return Err(Error::validation("benchmark chains need at least 10 iterations"));
        }
        if !(0.0..1.0).contains(&self.burn_in_frac) {
            return Err(Error::validation(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in_frac
            )));
        }
        self.kernel(self.seed).validate(&self.ladder)
    }

    fn kernel(&self, seed: u64) -> KernelConfig {
        KernelConfig {
            base_step: self.base_step,
            step_rule: self.step_rule,
            temp_move_prob: self.temp_move_prob,
            seed,
            init: InitPoint::Origin,
        }
    }
}

/// One combination rule's result on one replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub estimate: f64,
    pub ess: f64,
    pub ks: f64,
}

/// One replicate: the same chain combined three ways.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub seed: u64,
    /// Samples the chain left at the cold rung — what a classical run
    /// would have kept.
    pub cold_samples: usize,
    pub st_only: MethodOutcome,
    pub naive: MethodOutcome,
    pub optimal: MethodOutcome,
    /// Slack in the optimal-vs-summed-per-rung ESS bound; absent when some
    /// visited rung has a single sample.
    pub remark_gap: Option<f64>,
}

/// Aggregate over replicates for one combination rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub rmse: f64,
    pub mean_ess: f64,
    pub mean_ks: f64,
}

/// Full benchmark output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureBenchReport {
    pub config: MixtureBenchConfig,
    pub true_mean: f64,
    /// Adapted pseudo-prior used by every replicate.
    pub prior_log_p: Vec<f64>,
    /// Rungs (1-based) the adaptation pilot never visited; nonempty means
    /// the run is suspect.
    pub zero_visit_rungs: Vec<usize>,
    pub methods: Vec<MethodSummary>,
    pub replicates: Vec<ReplicateOutcome>,
}

fn summarise(method: Method, truth: f64, outcomes: &[(f64, f64, f64)]) -> MethodSummary {
    let n = outcomes.len() as f64;
    let mean_estimate = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
    let var = outcomes.iter().map(|o| (o.0 - mean_estimate).powi(2)).sum::<f64>()
        / (n - 1.0).max(1.0);
    let mse = outcomes.iter().map(|o| (o.0 - truth).powi(2)).sum::<f64>() / n;
    MethodSummary {
        method,
        mean_estimate,
        sd_estimate: var.sqrt(),
        rmse: mse.sqrt(),
        mean_ess: outcomes.iter().map(|o| o.1).sum::<f64>() / n,
        mean_ks: outcomes.iter().map(|o| o.2).sum::<f64>() / n,
    }
}

/// Run the bimodal benchmark: a well-separated two-component normal
/// mixture, one adapted pseudo-prior, then independent tempered chains
/// whose samples are combined three ways — cold-rung only, weight-mass
/// (naive), and ESS-optimal — and scored on mean error, ESS, and
/// distribution distance against the exact mixture CDF.
///
/// Replicates run in parallel; results are deterministic for a given
/// config because every replicate's seed is drawn up front.
pub fn run_mixture_experiment(cfg: &MixtureBenchConfig) -> Result<MixtureBenchReport> {
    use rand::{Rng, SeedableRng};
    cfg.validate()?;

    let spec = benchmark_mixture_spec();
    let target = benchmark_mixture();
    let true_mean = spec.mean();

    let mut seeder = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let adapt_seed: u64 = seeder.random();
    let replicate_seeds: Vec<u64> = (0..cfg.replicates).map(|_| seeder.random()).collect();

    let adapt_cfg = AdaptConfig::new(
        cfg.adapt_stage_iters,
        cfg.adapt_stage_iters,
        cfg.kernel(adapt_seed),
    );
    let adapted = adapt_pseudo_prior(&target, &cfg.ladder, &adapt_cfg)?;

    let burn_in = (cfg.iters as f64 * cfg.burn_in_frac).round() as usize;
    let h = Estimand::identity();
    let outcomes: Result<Vec<ReplicateOutcome>> = replicate_seeds
        .par_iter()
        .map(|&seed| {
            let run_cfg = StConfig { iters: cfg.iters, burn_in, kernel: cfg.kernel(seed) };
            let trace = st_run(&target, &cfg.ladder, &adapted.prior, &run_cfg)?;
            let bins = bin_by_temperature(&trace);
            let weights = log_importance_weights(&bins)?;
            let points = bins.coordinate(0);

            let eval = |lambda: &[f64], method: Method| -> Result<(MethodOutcome, Option<f64>)> {
                let report = combine(&bins, &weights, lambda, &h, method)?;
                let lw = lambda_log_weights(&weights, lambda)?;
                let ks = weighted_ks(&points, &lw, |x| spec.cdf(x))?;
                let gap = if method == Method::Optimal {
                    remark_bound_gap(&report).ok()
                } else {
                    None
                };
                Ok((
                    MethodOutcome { estimate: report.estimate, ess: report.combined_ess, ks },
                    gap,
                ))
            };

            let (st_only_out, _) = eval(&st_lambda(cfg.ladder.len()), Method::StOnly)?;
            let (naive_out, _) = eval(&naive_lambda(&bins)?, Method::Naive)?;
            let (optimal_out, gap) = eval(&lambda_star(&weights)?, Method::Optimal)?;
            Ok(ReplicateOutcome {
                seed,
                cold_samples: bins.counts()[0],
                st_only: st_only_out,
                naive: naive_out,
                optimal: optimal_out,
                remark_gap: gap,
            })
        })
        .collect();
    let outcomes = outcomes?;

    let collect = |pick: fn(&ReplicateOutcome) -> &MethodOutcome| -> Vec<(f64, f64, f64)> {
        outcomes.iter().map(|o| (pick(o).estimate, pick(o).ess, pick(o).ks)).collect()
    };
    let methods = vec![
        summarise(Method::StOnly, true_mean, &collect(|o| &o.st_only)),
        summarise(Method::Naive, true_mean, &collect(|o| &o.naive)),
        summarise(Method::Optimal, true_mean, &collect(|o| &o.optimal)),
    ];

    Ok(MixtureBenchReport {
        config: cfg.clone(),
        true_mean,
        prior_log_p: adapted.prior.log_p().to_vec(),
        zero_visit_rungs: adapted.zero_visit_rungs,
        methods,
        replicates: outcomes,
    })
}
