//! Three ways to turn one tempered trace into an estimate: cold samples
//! only, classical pooled importance weighting, and the ESS-optimal
//! per-rung combination.

use tempest::analysis::weighted_ks;
use tempest::estimator::{
    bin_by_temperature, combine, lambda_log_weights, lambda_star, log_importance_weights,
    naive_lambda, st_lambda, Method,
};
use tempest::ladder::TemperatureLadder;
use tempest::sampler::{
    adapt_pseudo_prior, st_run, AdaptConfig, InitPoint, KernelConfig, StConfig, StepRule,
};
use tempest::target::{benchmark_mixture, benchmark_mixture_spec, Estimand};

fn main() -> tempest::Result<()> {
    let target = benchmark_mixture();
    let spec = benchmark_mixture_spec();
    let ladder = TemperatureLadder::truncated_geometric(10, 0.1)?;
    let kernel = KernelConfig {
        base_step: 2.5,
        step_rule: StepRule::InverseSqrtK,
        temp_move_prob: 0.2,
        seed: 12,
        init: InitPoint::Origin,
    };
    let adapted = adapt_pseudo_prior(&target, &ladder, &AdaptConfig::new(20_000, 20_000, kernel.clone()))?;
    let trace = st_run(
        &target,
        &ladder,
        &adapted.prior,
        &StConfig { iters: 100_000, burn_in: 10_000, kernel },
    )?;

    let bins = bin_by_temperature(&trace);
    let weights = log_importance_weights(&bins)?;
    let points = bins.coordinate(0);
    let h = Estimand::identity();

    println!("true mean {:.2}\n", spec.mean());
    println!("{:>8}  {:>9}  {:>9}  {:>7}", "method", "estimate", "ess", "ks");
    for (name, lambda, method) in [
        ("cold", st_lambda(ladder.len()), Method::StOnly),
        ("naive", naive_lambda(&bins)?, Method::Naive),
        ("optimal", lambda_star(&weights)?, Method::Optimal),
    ] {
        let report = combine(&bins, &weights, &lambda, &h, method)?;
        // Distribution-level quality: distance between the weighted sample
        // law and the target law.
        let lw = lambda_log_weights(&weights, &lambda)?;
        let ks = weighted_ks(&points, &lw, |x| spec.cdf(x))?;
        println!(
            "{name:>8}  {:>9.4}  {:>9.1}  {ks:>7.4}",
            report.estimate, report.combined_ess
        );
    }
    Ok(())
}
