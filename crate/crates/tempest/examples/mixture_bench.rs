//! A small replication study on the bimodal benchmark: the same chains,
//! three combination rules, replicated across seeds. Shrink or grow
//! `replicates`/`iters` to taste; the full-size study runs 100 x 100000.

use tempest::analysis::{run_mixture_experiment, MixtureBenchConfig};
use tempest::ladder::TemperatureLadder;

fn main() -> tempest::Result<()> {
    let cfg = MixtureBenchConfig {
        replicates: 10,
        iters: 20_000,
        ladder: TemperatureLadder::truncated_geometric(10, 0.1)?,
        seed: 1,
        ..MixtureBenchConfig::default()
    };
    let report = run_mixture_experiment(&cfg)?;

    println!(
        "{} replicates x {} iterations, true mean {:.2}\n",
        cfg.replicates, cfg.iters, report.true_mean
    );
    println!("{:>8}  {:>9}  {:>8}  {:>9}  {:>8}", "method", "mean_est", "rmse", "mean_ess", "mean_ks");
    for m in &report.methods {
        println!(
            "{:>8}  {:>9.4}  {:>8.4}  {:>9.1}  {:>8.4}",
            format!("{:?}", m.method),
            m.mean_estimate,
            m.rmse,
            m.mean_ess,
            m.mean_ks
        );
    }

    let beat_cold = report
        .replicates
        .iter()
        .filter(|r| r.optimal.ess > r.cold_samples as f64)
        .count();
    println!(
        "\noptimal combination beat the raw cold-sample count in {beat_cold}/{} replicates",
        report.replicates.len()
    );
    Ok(())
}
