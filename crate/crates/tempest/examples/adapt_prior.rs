//! Two-stage pseudo-prior adaptation, checked against the exact answer.
//!
//! For N(0, sigma^2) the normalising constant of every tempered rung is
//! known in closed form, so this is one of the few targets where the
//! adapted prior can be compared to the ideal one directly.

use tempest::ladder::TemperatureLadder;
use tempest::sampler::{adapt_pseudo_prior, AdaptConfig, InitPoint, KernelConfig, StepRule};
use tempest::target::make_normal;

fn main() -> tempest::Result<()> {
    let sigma = 2.0;
    let target = make_normal(0.0, sigma)?;
    let ladder = TemperatureLadder::geometric(8, 0.4)?;

    let kernel = KernelConfig {
        base_step: sigma,
        step_rule: StepRule::InverseSqrtK,
        temp_move_prob: 0.3,
        seed: 5,
        init: InitPoint::Origin,
    };
    let outcome = adapt_pseudo_prior(&target, &ladder, &AdaptConfig::new(30_000, 60_000, kernel))?;
    if !outcome.zero_visit_rungs.is_empty() {
        println!("warning: the pilot missed rungs {:?}", outcome.zero_visit_rungs);
    }

    // log Z(k) for a centred normal, and the ideal prior ~ 1/Z(k).
    let log_z =
        |k: f64| 0.5 * (1.0 - k) * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - 0.5 * k.ln();
    let ideal_raw: Vec<f64> = ladder.rungs().iter().map(|&k| -log_z(k)).collect();
    let top = ideal_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    println!("{:>8}  {:>9}  {:>9}  {:>7}", "k", "adapted", "analytic", "error");
    for ((k, got), raw) in ladder.rungs().iter().zip(outcome.prior.log_p()).zip(&ideal_raw) {
        let want = raw - top;
        println!("{k:>8.4}  {got:>9.3}  {want:>9.3}  {:>7.3}", got - want);
    }
    Ok(())
}
