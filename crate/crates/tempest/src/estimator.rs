//! Importance-weighted reuse of tempered samples.
//!
//! A tempered run leaves samples scattered across the rungs of a ladder.
//! Binning them by rung ([`bin_by_temperature`]) and attaching the
//! importance weights `w_ij = pi(theta_ij)^(1 - k_i)` makes every rung's
//! draws usable for estimating expectations under the cold density `pi`,
//! not just the `k = 1` draws.
//!
//! Per rung `i`, with weight total `W_i`, the self-normalised estimator is
//! `h_i = sum_j w_ij h(theta_ij) / W_i`. A convex combination over rungs,
//! `h_lambda = sum_i lambda_i h_i`, has effective sample size
//!
//! ```text
//! ESS(lambda) = T (T - 1) / (T^2 sum_i lambda_i^2 / ell_i  -  1),
//! ell_i = W_i^2 / sum_j w_ij^2,
//! ```
//!
//! which is maximised by `lambda_i* = ell_i / sum_r ell_r`
//! ([`lambda_star`]). The maximised ESS is never worse than the summed
//! per-rung ESS values by more than `1/4 + 1/T` ([`remark_bound_gap`]),
//! so combining rungs optimally cannot lose more than a quarter of a
//! sample relative to treating the rungs separately.
//!
//! All weight handling is in log space. The per-rung logs are stabilised by
//! subtracting the rung maximum, which is exactly the scale freedom of a
//! self-normalised estimator. The naive combination `lambda_i = W_i / W`
//! ([`naive_lambda`]) is the one quantity that *does* compare weights
//! across rungs, so it uses a single global stabilising constant instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::TemperatureLadder;
use crate::numeric::log_sum_exp;
use crate::sampler::TemperedTrace;
use crate::target::Estimand;

/// Samples gathered at one rung, in within-rung time order.
#[derive(Debug, Clone, Default)]
pub struct RungBin {
    pub thetas: Vec<Vec<f64>>,
    pub log_pi: Vec<f64>,
}

impl RungBin {
    pub fn len(&self) -> usize {
        self.log_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_pi.is_empty()
    }
}

/// Trace samples grouped by rung.
#[derive(Debug, Clone)]
pub struct TemperatureBins {
    ladder: TemperatureLadder,
    rungs: Vec<RungBin>,
}

impl TemperatureBins {
    /// Assemble bins directly. Mostly useful for feeding externally
    /// produced importance-sampling runs through the combination machinery;
    /// traces go through [`bin_by_temperature`] instead.
    pub fn from_parts(ladder: TemperatureLadder, rungs: Vec<RungBin>) -> Result<Self> {
        if rungs.len() != ladder.len() {
            return Err(Error::validation(format!(
                "expected {} rung bins to match the ladder, got {}",
                ladder.len(),
                rungs.len()
            )));
        }
        for (i, bin) in rungs.iter().enumerate() {
            if bin.thetas.len() != bin.log_pi.len() {
                return Err(Error::validation(format!(
                    "rung {}: {} points but {} log-density values",
                    i + 1,
                    bin.thetas.len(),
                    bin.log_pi.len()
                )));
            }
        }
        Ok(TemperatureBins { ladder, rungs })
    }

    /// Merge several traces (e.g. the per-rung chains of a coupled run)
    /// into one set of bins. All traces must share the same ladder.
    pub fn from_traces(traces: &[TemperedTrace]) -> Result<Self> {
        let first = traces
            .first()
            .ok_or_else(|| Error::validation("no traces to bin"))?;
        let ladder = first.ladder().clone();
        let mut rungs = vec![RungBin::default(); ladder.len()];
        for trace in traces {
            if trace.ladder() != &ladder {
                return Err(Error::validation(
                    "traces disagree on the temperature ladder",
                ));
            }
            for rec in trace.records() {
                rungs[rec.rung].thetas.push(rec.theta.clone());
                rungs[rec.rung].log_pi.push(rec.log_pi);
            }
        }
        Ok(TemperatureBins { ladder, rungs })
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.ladder
    }

    pub fn rungs(&self) -> &[RungBin] {
        &self.rungs
    }

    /// Per-rung sample counts `T_i`.
    pub fn counts(&self) -> Vec<usize> {
        self.rungs.iter().map(RungBin::len).collect()
    }

    /// Total retained sample count `T`.
    pub fn total(&self) -> usize {
        self.rungs.iter().map(RungBin::len).sum()
    }

    /// The `d`-th coordinate of every sample, rung-major, matching the
    /// layout of [`lambda_log_weights`].
    pub fn coordinate(&self, d: usize) -> Vec<f64> {
        self.rungs
            .iter()
            .flat_map(|bin| bin.thetas.iter().map(move |t| t[d]))
            .collect()
    }
}

/// Group a trace's records by rung.
pub fn bin_by_temperature(trace: &TemperedTrace) -> TemperatureBins {
    let mut rungs = vec![RungBin::default(); trace.ladder().len()];
    for rec in trace.records() {
        rungs[rec.rung].thetas.push(rec.theta.clone());
        rungs[rec.rung].log_pi.push(rec.log_pi);
    }
    TemperatureBins {
        ladder: trace.ladder().clone(),
        rungs,
    }
}

/// Stabilised log-weights for one rung: `stabilized = raw - shift` where
/// `shift` is the rung maximum, so the largest stabilised entry is 0.
#[derive(Debug, Clone)]
pub struct RungWeights {
    stabilized: Vec<f64>,
    shift: f64,
}

impl RungWeights {
    pub fn stabilized(&self) -> &[f64] {
        &self.stabilized
    }

    /// The subtracted per-rung stabilising constant.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.stabilized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stabilized.is_empty()
    }

    /// Weights normalised to sum to 1 within the rung.
    pub fn normalized(&self) -> Vec<f64> {
        let log_total = log_sum_exp(&self.stabilized);
        self.stabilized.iter().map(|l| (l - log_total).exp()).collect()
    }
}

/// Per-rung stabilised log importance weights `(1 - k_i) log pi(theta_ij)`.
#[derive(Debug, Clone)]
pub struct LogWeights {
    rungs: Vec<RungWeights>,
}

impl LogWeights {
    pub fn rungs(&self) -> &[RungWeights] {
        &self.rungs
    }

    pub fn rung(&self, i: usize) -> &RungWeights {
        &self.rungs[i]
    }
}

/// Compute per-rung stabilised log weights from binned samples.
///
/// Fails if any stored log-density is non-finite; a `-inf` entry would be a
/// zero-density point that no valid chain can occupy.
pub fn log_importance_weights(bins: &TemperatureBins) -> Result<LogWeights> {
    let mut rungs = Vec::with_capacity(bins.ladder().len());
    for (i, bin) in bins.rungs().iter().enumerate() {
        let k = bins.ladder().k(i);
        let mut raw = Vec::with_capacity(bin.len());
        for (j, lp) in bin.log_pi.iter().enumerate() {
            if !lp.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite log pi at rung {}, sample {}: {lp}",
                    i + 1,
                    j + 1
                )));
            }
            raw.push((1.0 - k) * lp);
        }
        let shift = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let stabilized = raw.iter().map(|r| r - shift).collect();
        rungs.push(RungWeights { stabilized, shift });
    }
    Ok(LogWeights { rungs })
}

fn check_log_weights(logs: &[f64], what: &str) -> Result<()> {
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::validation(format!("{what}: log weights must not be NaN or +inf")));
    }
    Ok(())
}

/// Effective sample size of one weight vector (given as logs):
/// `T / (1 + cv^2)` with `cv^2 = sum (w - wbar)^2 / ((T-1) wbar^2)`.
///
/// Invariant under rescaling the weights. Needs at least two weights, not
/// all zero.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    check_log_weights(log_weights, "ess")?;
    let t = log_weights.len();
    if t < 2 {
        return Err(Error::validation(format!("ess needs at least 2 weights, got {t}")));
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::validation("ess: all weights are zero"));
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let mean = w.iter().sum::<f64>() / t as f64;
    let ss: f64 = w.iter().map(|x| (x - mean).powi(2)).sum();
    let cv2 = ss / ((t - 1) as f64 * mean * mean);
    Ok(t as f64 / (1.0 + cv2))
}

/// Rung quality score `ell = W^2 / sum_j w_j^2`, in `[1, T]` for a
/// nonempty rung; an empty rung scores 0.
pub fn ell(log_weights: &[f64]) -> Result<f64> {
    check_log_weights(log_weights, "ell")?;
    if log_weights.is_empty() {
        return Ok(0.0);
    }
    let log_sum = log_sum_exp(log_weights);
    if log_sum == f64::NEG_INFINITY {
        return Err(Error::validation("ell: all weights are zero"));
    }
    let doubled: Vec<f64> = log_weights.iter().map(|l| 2.0 * l).collect();
    let log_sum_sq = log_sum_exp(&doubled);
    Ok((2.0 * log_sum - log_sum_sq).exp())
}

/// ESS of one rung's self-normalised estimator via the closed form
/// `T_i (T_i - 1) ell_i / (T_i^2 - ell_i)`; needs `T_i >= 2`.
pub fn ess_per_rung(log_weights: &[f64]) -> Result<f64> {
    let t = log_weights.len();
    if t < 2 {
        return Err(Error::validation(format!(
            "per-rung ess needs at least 2 samples, got {t}"
        )));
    }
    let l = ell(log_weights)?;
    let t = t as f64;
    Ok(t * (t - 1.0) * l / (t * t - l))
}

/// The ESS-optimal combination `lambda_i* = ell_i / sum_r ell_r`.
/// Empty rungs get `lambda = 0`; at least one rung must be nonempty.
pub fn lambda_star(weights: &LogWeights) -> Result<Vec<f64>> {
    let ells: Vec<f64> = weights
        .rungs()
        .iter()
        .map(|r| ell(r.stabilized()))
        .collect::<Result<_>>()?;
    let total: f64 = ells.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation("lambda_star: every rung is empty"));
    }
    Ok(ells.iter().map(|l| l / total).collect())
}

/// The weight-mass combination `lambda_i = W_i / W`.
///
/// Unlike everything above, the rung totals `W_i` are compared across
/// rungs, so a single global stabilising constant is subtracted before
/// exponentiating. The result covaries when one rung's weights are
/// rescaled — by design: it is exactly the classical pooled-importance-
/// sampling weighting, kept for comparison against the optimal rule.
pub fn naive_lambda(bins: &TemperatureBins) -> Result<Vec<f64>> {
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(bins.rungs().len());
    for (i, bin) in bins.rungs().iter().enumerate() {
        let k = bins.ladder().k(i);
        let mut rung = Vec::with_capacity(bin.len());
        for (j, lp) in bin.log_pi.iter().enumerate() {
            if !lp.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite log pi at rung {}, sample {}: {lp}",
                    i + 1,
                    j + 1
                )));
            }
            rung.push((1.0 - k) * lp);
        }
        raw.push(rung);
    }
    let global_max = raw
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if global_max == f64::NEG_INFINITY {
        return Err(Error::validation("naive_lambda: every rung is empty"));
    }
    let log_rung_totals: Vec<f64> = raw
        .iter()
        .map(|rung| {
            let shifted: Vec<f64> = rung.iter().map(|l| l - global_max).collect();
            log_sum_exp(&shifted)
        })
        .collect();
    let log_total = log_sum_exp(&log_rung_totals);
    Ok(log_rung_totals
        .iter()
        .map(|lw| {
            if *lw == f64::NEG_INFINITY {
                0.0
            } else {
                (lw - log_total).exp()
            }
        })
        .collect())
}

/// The combination that ignores every rung but the cold one.
pub fn st_lambda(m: usize) -> Vec<f64> {
    let mut lambda = vec![0.0; m];
    lambda[0] = 1.0;
    lambda
}

/// Closed-form ESS of the `lambda`-combined weight vector:
/// `T (T - 1) / (T^2 sum_{i: lambda_i > 0} lambda_i^2 / ell_i - 1)`.
///
/// For combinations assembled from real weight vectors this agrees with
/// [`ess`] applied to the combined vector; fed arbitrary `(lambda, ell, T)`
/// triples it is a score, not a sample count, and may leave `(0, T]`.
pub fn combined_ess(lambda: &[f64], ells: &[f64], t: usize) -> Result<f64> {
    if lambda.len() != ells.len() {
        return Err(Error::validation(format!(
            "lambda and ell lengths disagree: {} vs {}",
            lambda.len(),
            ells.len()
        )));
    }
    if t < 2 {
        return Err(Error::validation(format!("combined ess needs T >= 2, got {t}")));
    }
    let mut sum = 0.0;
    for (i, (&l, &e)) in lambda.iter().zip(ells).enumerate() {
        if l > 0.0 {
            if e <= 0.0 {
                return Err(Error::validation(format!(
                    "rung {} has positive lambda but nonpositive ell",
                    i + 1
                )));
            }
            sum += l * l / e;
        }
    }
    let t = t as f64;
    let denom = t * t * sum - 1.0;
    if denom <= 0.0 {
        return Err(Error::numeric(format!(
            "combined ess denominator is nonpositive ({denom}); lambda/ell are not consistent with any weight vector"
        )));
    }
    Ok(t * (t - 1.0) / denom)
}

/// Log-weights of the combined vector `w^lambda`, rung-major, aligned with
/// [`TemperatureBins::coordinate`]. Entry `(i, j)` is
/// `ln(lambda_i w_ij / W_i)`; rungs with `lambda_i = 0` contribute `-inf`.
pub fn lambda_log_weights(weights: &LogWeights, lambda: &[f64]) -> Result<Vec<f64>> {
    if lambda.len() != weights.rungs().len() {
        return Err(Error::validation(format!(
            "lambda length {} does not match rung count {}",
            lambda.len(),
            weights.rungs().len()
        )));
    }
    let mut out = Vec::new();
    for (lam, rung) in lambda.iter().zip(weights.rungs()) {
        if *lam > 0.0 {
            let log_total = log_sum_exp(rung.stabilized());
            out.extend(rung.stabilized().iter().map(|l| lam.ln() + l - log_total));
        } else {
            out.extend(std::iter::repeat(f64::NEG_INFINITY).take(rung.len()));
        }
    }
    Ok(out)
}

/// Which combination rule produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Optimal,
    Naive,
    StOnly,
    Custom,
}

/// Everything a combination run produces: the combination itself, its
/// quality diagnostics, and the estimate.
///
/// Rung-indexed vectors are ordered cold to hot like the ladder. Entries of
/// `ess_per_rung` are `null`/`None` for rungs with fewer than two samples,
/// where the per-rung ESS is undefined; such rungs are listed in
/// `single_sample_rungs` (1-based, matching trace files). The closed-form
/// `combined_ess_raw` is capped at `T` on the `combined_ess` field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinationReport {
    pub method: Method,
    pub estimand: String,
    pub t: usize,
    pub counts: Vec<usize>,
    pub lambda: Vec<f64>,
    pub ell: Vec<f64>,
    pub ess_per_rung: Vec<Option<f64>>,
    pub combined_ess: f64,
    pub combined_ess_raw: f64,
    pub estimate: f64,
    /// Delta-method standard error of `estimate`, treating samples as
    /// independent within rungs. MCMC autocorrelation is *not* included, so
    /// this underestimates the spread for strongly correlated chains.
    pub se: f64,
    pub single_sample_rungs: Vec<usize>,
}

/// Form the combined estimate `h_lambda = sum_i lambda_i h_i` and its
/// diagnostics.
///
/// `lambda` must be a probability vector (entries nonnegative, summing to 1
/// within 1e-12) that puts no mass on empty rungs.
pub fn combine(
    bins: &TemperatureBins,
    weights: &LogWeights,
    lambda: &[f64],
    h: &Estimand,
    method: Method,
) -> Result<CombinationReport> {
    let m = bins.ladder().len();
    if lambda.len() != m {
        return Err(Error::validation(format!(
            "lambda length {} does not match rung count {m}",
            lambda.len()
        )));
    }
    if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::validation("lambda entries must be finite and nonnegative"));
    }
    let total: f64 = lambda.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "lambda must sum to 1 within 1e-12, got {total}"
        )));
    }
    let counts = bins.counts();
    let t = bins.total();
    if t < 2 {
        return Err(Error::validation(format!("combine needs at least 2 samples, got {t}")));
    }

    let mut estimate = 0.0;
    let mut var_iid = 0.0;
    for i in 0..m {
        if lambda[i] == 0.0 {
            continue;
        }
        if counts[i] == 0 {
            return Err(Error::validation(format!(
                "lambda places mass {} on empty rung {}",
                lambda[i],
                i + 1
            )));
        }
        let wn = weights.rung(i).normalized();
        let bin = &bins.rungs()[i];
        let mut mean = 0.0;
        for (w, theta) in wn.iter().zip(&bin.thetas) {
            mean += w * h.eval(theta);
        }
        let mut v = 0.0;
        for (w, theta) in wn.iter().zip(&bin.thetas) {
            v += w * w * (h.eval(theta) - mean).powi(2);
        }
        estimate += lambda[i] * mean;
        var_iid += lambda[i] * lambda[i] * v;
    }

    let ells: Vec<f64> = weights
        .rungs()
        .iter()
        .map(|r| ell(r.stabilized()))
        .collect::<Result<_>>()?;
    let ess_rung: Vec<Option<f64>> = weights
        .rungs()
        .iter()
        .map(|r| {
            if r.len() >= 2 {
                ess_per_rung(r.stabilized()).ok()
            } else {
                None
            }
        })
        .collect();
    let raw = combined_ess(lambda, &ells, t)?;

    Ok(CombinationReport {
        method,
        estimand: h.label().to_string(),
        t,
        counts: counts.clone(),
        lambda: lambda.to_vec(),
        ell: ells,
        ess_per_rung: ess_rung,
        combined_ess: raw.min(t as f64),
        combined_ess_raw: raw,
        estimate,
        se: var_iid.sqrt(),
        single_sample_rungs: counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 1)
            .map(|(i, _)| i + 1)
            .collect(),
    })
}

/// Slack in the combination bound
/// `ESS(lambda*) >= sum_i ESS(w_i) - 1/4 - 1/T`, i.e.
/// `combined - sum + 1/4 + 1/T`, which is nonnegative for any weights.
///
/// The report must be an optimal-combination report, and every nonempty
/// rung needs at least two samples for its ESS to exist.
pub fn remark_bound_gap(report: &CombinationReport) -> Result<f64> {
    if report.method != Method::Optimal {
        return Err(Error::validation(
            "the combination bound applies to the optimal combination report",
        ));
    }
    let mut sum = 0.0;
    for (i, count) in report.counts.iter().enumerate() {
        match count {
            0 => continue,
            1 => {
                return Err(Error::validation(format!(
                    "rung {} has a single sample; its per-rung ess is undefined",
                    i + 1
                )))
            }
            _ => {
                sum += report.ess_per_rung[i].ok_or_else(|| {
                    Error::validation(format!("missing per-rung ess for rung {}", i + 1))
                })?;
            }
        }
    }
    Ok(report.combined_ess_raw - sum + 0.25 + 1.0 / report.t as f64)
}
