//! Tempered MCMC kernels: single-chain simulated tempering, pseudo-prior
//! adaptation, and the coupled multi-chain variant.
//!
//! # The single-chain kernel
//!
//! The chain lives on pairs `(theta, rung)` and targets
//! `pi(theta)^{k_rung} p(rung)` jointly, where `p` is the pseudo-prior.
//! Each iteration is either a theta move (random-walk Metropolis at the
//! current rung's inverse temperature) or a rung move (propose an adjacent
//! rung, accept with the tempered density ratio times the pseudo-prior
//! ratio and a boundary correction for the asymmetric proposal at the
//! ladder's ends).
//!
//! # Randomness contract
//!
//! Runs are reproducible given a seed, and the exact draw order is part of
//! the public behaviour (it is what makes a one-rung run bit-identical to
//! plain random-walk Metropolis):
//!
//! 1. the generator is `ChaCha8Rng::seed_from_u64(seed)`;
//! 2. a Gaussian initial point consumes `dim` standard normals (other
//!    initialisations consume nothing);
//! 3. each iteration first consumes one Bernoulli draw choosing the move
//!    type — unless `temp_move_prob == 0`, in which case no draw is made;
//! 4. a theta move consumes `dim` standard normals for the proposal, then
//!    one uniform for the accept decision;
//! 5. a rung move at an interior rung consumes one uniform for the
//!    proposal direction (`u < 0.5` proposes the hotter neighbour), then
//!    one uniform for the accept decision; at a boundary rung the only
//!    neighbour is proposed without a direction draw. With a single-rung
//!    ladder the move is a no-op consuming no randomness.
//!
//! The accept uniform is always consumed, even when the proposal would be
//! accepted with certainty. Proposals where the target density vanishes
//! are rejected at every rung, including `k = 0`: such points carry zero
//! importance weight, so letting the hottest rung wander off the support
//! would only produce dead samples.
//!
//! The coupled variant ([`mc3_run`]) instead runs one chain per rung and
//! swaps adjacent states: the master seed seeds a generator whose first
//! `m` draws become the per-chain seeds and whose next draw seeds the swap
//! generator, so chain trajectories are independent of how often swaps are
//! attempted.

mod trace;

pub use trace::{
    check_trace_consistency, meta_path, read_csv, write_csv_file, TemperedTrace, TraceMeta,
    TraceRecord,
};

use std::f64::consts::LN_2;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::TemperatureLadder;
use crate::target::TargetDensity;

/// Pseudo-prior over rungs, stored as log masses centred so the largest
/// is 0. Only differences enter acceptance ratios, so the centring is pure
/// normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPrior {
    log_p: Vec<f64>,
}

impl PseudoPrior {
    /// Centre and store log masses; every entry must be finite.
    pub fn new(log_p: Vec<f64>) -> Result<Self> {
        if log_p.is_empty() {
            return Err(Error::validation("pseudo-prior must have at least one rung"));
        }
        if log_p.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("pseudo-prior log masses must be finite"));
        }
        let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(PseudoPrior { log_p: log_p.iter().map(|v| v - max).collect() })
    }

    /// Equal mass on every rung.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::validation("pseudo-prior must have at least one rung"));
        }
        Ok(PseudoPrior { log_p: vec![0.0; m] })
    }

    pub fn log_p(&self) -> &[f64] {
        &self.log_p
    }

    pub fn len(&self) -> usize {
        self.log_p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Write one log mass per line, shortest-roundtrip form.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for v in &self.log_p {
            text.push_str(&format!("{v:?}\n"));
        }
        fs::write(path, text)?;
        Ok(())
    }

    /// Read a prior file: one log mass per line, `#` comments and blank
    /// lines ignored. The masses are recentred on load.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut log_p = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|e| {
                Error::validation(format!("prior file line {}: cannot parse {line:?}: {e}", idx + 1))
            })?;
            log_p.push(v);
        }
        PseudoPrior::new(log_p)
    }
}

/// How the random-walk step size depends on the rung.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `base_step` everywhere.
    Constant,
    /// `base_step / sqrt(k)`: hotter rungs flatten the tempered density by
    /// a factor `k`, so its length scale grows like `1/sqrt(k)`.
    InverseSqrtK,
}

/// Where the chain starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPoint {
    Origin,
    Point { theta: Vec<f64> },
    Gaussian { sd: f64 },
}

/// Parameters shared by every kernel in this module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub base_step: f64,
    pub step_rule: StepRule,
    /// Probability of attempting a rung move instead of a theta move.
    /// Ignored by [`mc3_run`], which has no rung moves.
    pub temp_move_prob: f64,
    pub seed: u64,
    pub init: InitPoint,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            base_step: 1.0,
            step_rule: StepRule::InverseSqrtK,
            temp_move_prob: 0.1,
            seed: 0,
            init: InitPoint::Origin,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self, ladder: &TemperatureLadder) -> Result<()> {
        if !self.base_step.is_finite() || self.base_step <= 0.0 {
            return Err(Error::validation(format!(
                "base step must be a positive number, got {}",
                self.base_step
            )));
        }
        if !(0.0..1.0).contains(&self.temp_move_prob) {
            return Err(Error::validation(format!(
                "temperature move probability must lie in [0, 1), got {}; \
                 at 1 the chain would never move theta",
                self.temp_move_prob
            )));
        }
        if self.step_rule == StepRule::InverseSqrtK && ladder.has_zero_rung() {
            return Err(Error::validation(
                "the 1/sqrt(k) step rule divides by zero at a k = 0 rung; use the constant rule",
            ));
        }
        match &self.init {
            InitPoint::Origin => {}
            InitPoint::Point { theta } => {
                if theta.is_empty() || theta.iter().any(|x| !x.is_finite()) {
                    return Err(Error::validation("initial point must be nonempty and finite"));
                }
            }
            InitPoint::Gaussian { sd } => {
                if !sd.is_finite() || *sd <= 0.0 {
                    return Err(Error::validation(format!(
                        "initial spread must be a positive number, got {sd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Single-chain run lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub kernel: KernelConfig,
}

impl StConfig {
    pub fn validate(&self, ladder: &TemperatureLadder) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::validation("iteration count must be positive"));
        }
        if self.burn_in >= self.iters {
            return Err(Error::validation(format!(
                "burn-in {} must be smaller than the iteration count {}",
                self.burn_in, self.iters
            )));
        }
        self.kernel.validate(ladder)
    }
}

/// Two-stage pseudo-prior adaptation lengths and gain schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// Initial stochastic-approximation gain; the iteration-`n` penalty is
    /// `c0 / (1 + n / n0)`.
    pub c0: f64,
    /// Gain half-life; defaults to `10 m`.
    pub n0: Option<f64>,
    pub kernel: KernelConfig,
}

impl AdaptConfig {
    pub fn new(stage1_iters: usize, stage2_iters: usize, kernel: KernelConfig) -> Self {
        AdaptConfig { stage1_iters, stage2_iters, c0: 1.0, n0: None, kernel }
    }

    pub fn validate(&self, ladder: &TemperatureLadder) -> Result<()> {
        let m = ladder.len();
        let floor = 100 * m;
        if self.stage1_iters < floor || self.stage2_iters < floor {
            return Err(Error::validation(format!(
                "adaptation stages need at least {floor} iterations for {m} rungs, \
                 got {} and {}",
                self.stage1_iters, self.stage2_iters
            )));
        }
        if !self.c0.is_finite() || self.c0 <= 0.0 {
            return Err(Error::validation(format!("gain c0 must be positive, got {}", self.c0)));
        }
        if let Some(n0) = self.n0 {
            if !n0.is_finite() || n0 <= 0.0 {
                return Err(Error::validation(format!("gain half-life n0 must be positive, got {n0}")));
            }
        }
        self.kernel.validate(ladder)
    }
}

/// Adaptation result: the prior, plus any rungs the pilot never reached.
#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub prior: PseudoPrior,
    /// Rungs (1-based) with zero pilot visits. A nonempty list means the
    /// prior is unreliable there; rerun with longer stages or a denser
    /// ladder.
    pub zero_visit_rungs: Vec<usize>,
}

/// Coupled-chain run lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mc3Config {
    pub iters: usize,
    pub burn_in: usize,
    /// Propose one adjacent swap after every `swap_interval` sweeps.
    pub swap_interval: usize,
    pub kernel: KernelConfig,
}

impl Mc3Config {
    pub fn validate(&self, ladder: &TemperatureLadder) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::validation("iteration count must be positive"));
        }
        if self.burn_in >= self.iters {
            return Err(Error::validation(format!(
                "burn-in {} must be smaller than the iteration count {}",
                self.burn_in, self.iters
            )));
        }
        if self.swap_interval == 0 {
            return Err(Error::validation("swap interval must be at least 1"));
        }
        self.kernel.validate(ladder)
    }
}

struct ChainState {
    theta: Vec<f64>,
    log_pi: f64,
    rung: usize,
}

struct Kernel<'a> {
    target: &'a TargetDensity,
    ladder: &'a TemperatureLadder,
    base_step: f64,
    step_rule: StepRule,
}

impl Kernel<'_> {
    fn step_sd(&self, k: f64) -> f64 {
        match self.step_rule {
            StepRule::Constant => self.base_step,
            StepRule::InverseSqrtK => self.base_step / k.sqrt(),
        }
    }

    fn theta_step(&self, rng: &mut ChaCha8Rng, state: &mut ChainState, iter: usize) -> Result<bool> {
        let k = self.ladder.k(state.rung);
        let sd = self.step_sd(k);
        let mut prop = state.theta.clone();
        for x in prop.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sd * z;
        }
        let lp = self.target.log_density(&prop);
        if lp.is_nan() || lp == f64::INFINITY {
            return Err(Error::numeric(format!(
                "target log density returned {lp} at iteration {iter}"
            )));
        }
        let log_alpha = if lp == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            k * (lp - state.log_pi)
        };
        let u: f64 = rng.random();
        if u.ln() < log_alpha {
            state.theta = prop;
            state.log_pi = lp;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn rung_step(&self, rng: &mut ChaCha8Rng, log_p: &[f64], state: &mut ChainState) -> bool {
        let m = self.ladder.len();
        if m == 1 {
            return false;
        }
        let i = state.rung;
        let at_end = |r: usize| r == 0 || r == m - 1;
        let (j, corr) = if i == 0 {
            (1, if at_end(1) { 0.0 } else { -LN_2 })
        } else if i == m - 1 {
            (m - 2, if at_end(m - 2) { 0.0 } else { -LN_2 })
        } else {
            let u: f64 = rng.random();
            let j = if u < 0.5 { i + 1 } else { i - 1 };
            (j, if at_end(j) { LN_2 } else { 0.0 })
        };
        let log_alpha = (self.ladder.k(j) - self.ladder.k(i)) * state.log_pi + log_p[j]
            - log_p[i]
            + corr;
        let u: f64 = rng.random();
        if u.ln() < log_alpha {
            state.rung = j;
            true
        } else {
            false
        }
    }

    fn st_step(
        &self,
        rng: &mut ChaCha8Rng,
        log_p: &[f64],
        temp_move_prob: f64,
        state: &mut ChainState,
        iter: usize,
    ) -> Result<()> {
        let rung_move = temp_move_prob > 0.0 && rng.random_bool(temp_move_prob);
        if rung_move {
            self.rung_step(rng, log_p, state);
        } else {
            self.theta_step(rng, state, iter)?;
        }
        Ok(())
    }
}

fn init_state(
    rng: &mut ChaCha8Rng,
    target: &TargetDensity,
    init: &InitPoint,
    rung: usize,
) -> Result<ChainState> {
    let dim = target.dim();
    let theta = match init {
        InitPoint::Origin => vec![0.0; dim],
        InitPoint::Point { theta } => {
            if theta.len() != dim {
                return Err(Error::validation(format!(
                    "initial point has {} coordinates, target has dimension {dim}",
                    theta.len()
                )));
            }
            theta.clone()
        }
        InitPoint::Gaussian { sd } => (0..dim)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            })
            .collect(),
    };
    let log_pi = target.log_density(&theta);
    if !log_pi.is_finite() {
        return Err(Error::validation(format!(
            "initial point has log density {log_pi}; start the chain inside the support"
        )));
    }
    Ok(ChainState { theta, log_pi, rung })
}

/// Run the single-chain tempered sampler and retain everything after
/// burn-in. The chain starts at the hottest rung.
pub fn st_run(
    target: &TargetDensity,
    ladder: &TemperatureLadder,
    prior: &PseudoPrior,
    cfg: &StConfig,
) -> Result<TemperedTrace> {
    cfg.validate(ladder)?;
    if prior.len() != ladder.len() {
        return Err(Error::validation(format!(
            "pseudo-prior has {} rungs, ladder has {}",
            prior.len(),
            ladder.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.kernel.seed);
    let mut state = init_state(&mut rng, target, &cfg.kernel.init, ladder.len() - 1)?;
    let kernel = Kernel {
        target,
        ladder,
        base_step: cfg.kernel.base_step,
        step_rule: cfg.kernel.step_rule,
    };
    let mut records = Vec::with_capacity(cfg.iters - cfg.burn_in);
    for iter in 0..cfg.iters {
        kernel.st_step(&mut rng, prior.log_p(), cfg.kernel.temp_move_prob, &mut state, iter)?;
        if iter >= cfg.burn_in {
            records.push(TraceRecord {
                iter,
                rung: state.rung,
                theta: state.theta.clone(),
                log_pi: state.log_pi,
            });
        }
    }
    TemperedTrace::new(ladder.clone(), target.dim(), records)
}

/// Fit a pseudo-prior in two stages.
///
/// Stage one runs the kernel while penalising whichever rung the chain
/// occupies by a decaying gain, forcing it to visit everything and leaving
/// rough per-rung log masses. Stage two freezes those masses, runs a pilot,
/// and corrects each rung by its observed occupancy, which removes the
/// stage-one bias wherever the pilot actually visited. Rungs the pilot
/// missed are reported in the outcome.
///
/// A single-rung ladder needs no prior; adaptation short-circuits to the
/// trivial one.
pub fn adapt_pseudo_prior(
    target: &TargetDensity,
    ladder: &TemperatureLadder,
    cfg: &AdaptConfig,
) -> Result<AdaptOutcome> {
    cfg.validate(ladder)?;
    let m = ladder.len();
    if m == 1 {
        return Ok(AdaptOutcome { prior: PseudoPrior::uniform(1)?, zero_visit_rungs: vec![] });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.kernel.seed);
    let mut state = init_state(&mut rng, target, &cfg.kernel.init, m - 1)?;
    let kernel = Kernel {
        target,
        ladder,
        base_step: cfg.kernel.base_step,
        step_rule: cfg.kernel.step_rule,
    };
    let n0 = cfg.n0.unwrap_or(10.0 * m as f64);

    let mut log_p = vec![0.0; m];
    for n in 0..cfg.stage1_iters {
        kernel.st_step(&mut rng, &log_p, cfg.kernel.temp_move_prob, &mut state, n)?;
        log_p[state.rung] -= cfg.c0 / (1.0 + n as f64 / n0);
    }

    let stage1 = log_p.clone();
    let mut counts = vec![0usize; m];
    for n in 0..cfg.stage2_iters {
        kernel.st_step(&mut rng, &stage1, cfg.kernel.temp_move_prob, &mut state, n)?;
        counts[state.rung] += 1;
    }

    let total = cfg.stage2_iters as f64;
    let mut zero_visit_rungs = Vec::new();
    for (i, count) in counts.iter().enumerate() {
        if *count == 0 {
            zero_visit_rungs.push(i + 1);
        }
        log_p[i] = stage1[i] - ((count.max(&1).to_owned() as f64) / total).ln();
    }
    Ok(AdaptOutcome { prior: PseudoPrior::new(log_p)?, zero_visit_rungs })
}

/// Run one chain per rung with periodic adjacent swaps and return one
/// trace per rung (cold first). Merge them with
/// [`crate::estimator::TemperatureBins::from_traces`].
///
/// `kernel.temp_move_prob` is ignored: temperatures are fixed per chain
/// and mixing across rungs happens through swaps.
pub fn mc3_run(
    target: &TargetDensity,
    ladder: &TemperatureLadder,
    cfg: &Mc3Config,
) -> Result<Vec<TemperedTrace>> {
    cfg.validate(ladder)?;
    let m = ladder.len();
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.kernel.seed);
    let chain_seeds: Vec<u64> = (0..m).map(|_| seeder.random()).collect();
    let mut swap_rng = ChaCha8Rng::seed_from_u64(seeder.random());

    let mut rngs: Vec<ChaCha8Rng> =
        chain_seeds.iter().map(|s| ChaCha8Rng::seed_from_u64(*s)).collect();
    let mut states = Vec::with_capacity(m);
    for (i, rng) in rngs.iter_mut().enumerate() {
        states.push(init_state(rng, target, &cfg.kernel.init, i)?);
    }
    let kernel = Kernel {
        target,
        ladder,
        base_step: cfg.kernel.base_step,
        step_rule: cfg.kernel.step_rule,
    };

    let mut records: Vec<Vec<TraceRecord>> = vec![Vec::new(); m];
    for iter in 0..cfg.iters {
        for (i, rng) in rngs.iter_mut().enumerate() {
            kernel.theta_step(rng, &mut states[i], iter)?;
        }
        if m >= 2 && (iter + 1) % cfg.swap_interval == 0 {
            let p = swap_rng.random_range(0..m - 1);
            let log_alpha = (ladder.k(p) - ladder.k(p + 1))
                * (states[p + 1].log_pi - states[p].log_pi);
            let u: f64 = swap_rng.random();
            if u.ln() < log_alpha {
                let (a, b) = states.split_at_mut(p + 1);
                std::mem::swap(&mut a[p].theta, &mut b[0].theta);
                std::mem::swap(&mut a[p].log_pi, &mut b[0].log_pi);
            }
        }
        if iter >= cfg.burn_in {
            for (i, state) in states.iter().enumerate() {
                records[i].push(TraceRecord {
                    iter,
                    rung: i,
                    theta: state.theta.clone(),
                    log_pi: state.log_pi,
                });
            }
        }
    }
    records
        .into_iter()
        .map(|recs| TemperedTrace::new(ladder.clone(), target.dim(), recs))
        .collect()
}
