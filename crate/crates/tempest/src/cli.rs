//! The `tempest` command-line interface.
//!
//! Every sampling command requires an explicit seed (flag or config file);
//! there is no fallback to OS entropy, so runs are reproducible by
//! construction. Data goes to `--out` (`-` for stdout); progress, occupancy
//! summaries, and warnings go to stderr. Exit codes distinguish bad input
//! (2), numerical failure (3), and I/O problems (4).

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{
    exponent_table, run_mixture_experiment, MixtureBenchConfig, MixtureBenchReport, TABLE_RATIOS,
};
use crate::error::{Error, Result};
use crate::estimator::{
    combine, lambda_star, naive_lambda, st_lambda, log_importance_weights, Method,
    TemperatureBins,
};
use crate::ladder::{parse_ladder, TemperatureLadder};
use crate::sampler::{
    adapt_pseudo_prior, check_trace_consistency, meta_path, read_csv, st_run, write_csv_file,
    AdaptConfig, InitPoint, KernelConfig, PseudoPrior, StConfig, StepRule, TemperedTrace,
    TraceMeta,
};
use crate::target::{parse_target, Estimand};

#[derive(Parser)]
#[command(
    name = "tempest",
    version,
    about = "Tempered MCMC with ESS-optimal reuse of every rung's samples"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the single-chain tempered sampler and write a trace CSV
    Sample(SampleArgs),
    /// Fit a pseudo-prior over rungs by two-stage adaptation
    Adapt(AdaptArgs),
    /// Combine trace samples into an estimate with ESS diagnostics
    Combine(CombineArgs),
    /// Tabulate optimal and break-even tempering exponents for normal targets
    Table1(TableArgs),
    /// Benchmark combination rules on a well-separated bimodal target
    MixtureBench(BenchArgs),
    /// Print the rungs of a temperature ladder spec
    Ladder(LadderArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StepRuleArg {
    Constant,
    InverseSqrtK,
}

impl From<StepRuleArg> for StepRule {
    fn from(v: StepRuleArg) -> StepRule {
        match v {
            StepRuleArg::Constant => StepRule::Constant,
            StepRuleArg::InverseSqrtK => StepRule::InverseSqrtK,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Optimal,
    Naive,
    StOnly,
    Custom,
}

#[derive(Args)]
struct SampleArgs {
    /// Target density: "normal(mu,sigma)" or "mixture"
    #[arg(long)]
    target: Option<String>,
    /// Ladder spec: "geometric:m=10,delta=0.25", "geometric:m=10,kmin=0.1",
    /// "harmonic:m=10,delta=0.5", or "explicit:1,0.7,0.4"
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    /// Iterations to discard (default: iters / 10)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Random-walk step at k = 1
    #[arg(long)]
    base_step: Option<f64>,
    /// How the step scales with the rung
    #[arg(long, value_enum)]
    step_rule: Option<StepRuleArg>,
    /// Probability of attempting a rung move each iteration
    #[arg(long)]
    temp_move_prob: Option<f64>,
    /// RNG seed; required here or in the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Pseudo-prior file (one log mass per line); uniform if omitted
    #[arg(long)]
    prior: Option<PathBuf>,
    /// JSON file supplying defaults for any of the above
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV path, or - for stdout (stdout skips the metadata sidecar)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdaptArgs {
    /// Target density: "normal(mu,sigma)" or "mixture"
    #[arg(long)]
    target: Option<String>,
    /// Ladder spec (see `tempest sample --help`)
    #[arg(long)]
    ladder: Option<String>,
    /// Iterations per adaptation stage
    #[arg(long)]
    stage_iters: Option<usize>,
    /// Initial adaptation gain
    #[arg(long)]
    c0: Option<f64>,
    /// Gain half-life in iterations (default: 10 * rungs)
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long)]
    base_step: Option<f64>,
    #[arg(long, value_enum)]
    step_rule: Option<StepRuleArg>,
    #[arg(long)]
    temp_move_prob: Option<f64>,
    /// RNG seed; required here or in the config file
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file supplying defaults for any of the above
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prior file path, or - for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct CombineArgs {
    /// Trace CSV to combine; repeat to merge several runs over one ladder
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "optimal")]
    method: MethodArg,
    /// Comma-separated rung weights summing to 1 (only with --method custom)
    #[arg(long)]
    lambda: Option<String>,
    /// "identity" or "indicator:a,b"
    #[arg(long, default_value = "identity")]
    estimand: String,
    /// Recheck stored log densities against this target before combining
    #[arg(long)]
    target: Option<String>,
    /// Report JSON path, or - for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    /// Comma-separated sigma/mu ratios (default "0.0625,0.25,1,4,16")
    #[arg(long)]
    ratios: Option<String>,
    /// Emit JSON rows instead of an aligned table
    #[arg(long)]
    json: bool,
    /// Output path, or - for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// RNG seed driving adaptation and every replicate
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Iterations per replicate chain
    #[arg(long, default_value_t = 50_000)]
    iters: usize,
    #[arg(long, default_value_t = 0.1)]
    burn_in_frac: f64,
    /// Ladder spec (default "geometric:m=10,kmin=0.1")
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long, default_value_t = 2.5)]
    base_step: f64,
    #[arg(long, value_enum, default_value = "inverse-sqrt-k")]
    step_rule: StepRuleArg,
    #[arg(long, default_value_t = 0.2)]
    temp_move_prob: f64,
    /// Iterations per pseudo-prior adaptation stage
    #[arg(long, default_value_t = 20_000)]
    adapt_iters: usize,
    /// Report JSON path, or - for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct LadderArgs {
    /// Ladder spec (see `tempest sample --help`)
    spec: String,
    /// Emit the ladder as JSON instead of one rung per line
    #[arg(long)]
    json: bool,
    /// Output path, or - for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

/// Optional JSON config; command-line flags win over these, which win over
/// built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    target: Option<String>,
    ladder: Option<String>,
    iters: Option<usize>,
    burn_in: Option<usize>,
    base_step: Option<f64>,
    step_rule: Option<StepRule>,
    temp_move_prob: Option<f64>,
    seed: Option<u64>,
    stage_iters: Option<usize>,
    c0: Option<f64>,
    n0: Option<f64>,
    init: Option<InitPoint>,
    prior: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::validation(format!("config {}: {e}", p.display())))
        }
    }
}

fn require(what: &str, value: Option<String>) -> Result<String> {
    value.ok_or_else(|| {
        Error::validation(format!("--{what} is required (as a flag or in the config file)"))
    })
}

fn require_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    flag.or(config).ok_or_else(|| {
        Error::validation(
            "a seed is required: pass --seed or set \"seed\" in the config file \
             (runs never fall back to OS entropy)",
        )
    })
}

fn parse_float_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|e| Error::validation(format!("{what}: cannot parse {part:?}: {e}")))
        })
        .collect()
}

fn write_output(out: &Path, content: &str) -> Result<()> {
    if out == Path::new("-") {
        let mut stdout = io::stdout().lock();
        stdout.write_all(content.as_bytes())?;
        stdout.flush()?;
    } else {
        fs::write(out, content)?;
    }
    Ok(())
}

fn occupancy_to_stderr(trace: &TemperedTrace) {
    let ladder = trace.ladder();
    let mut counts = vec![0usize; ladder.len()];
    for rec in trace.records() {
        counts[rec.rung] += 1;
    }
    let total = trace.len().max(1);
    eprintln!("rung occupancy after burn-in:");
    for (i, count) in counts.iter().enumerate() {
        eprintln!(
            "  rung {:>3}  k = {:<22}  {:>9} samples ({:5.1}%)",
            i + 1,
            format!("{:?}", ladder.k(i)),
            count,
            100.0 * *count as f64 / total as f64
        );
    }
    let unvisited: Vec<String> =
        counts.iter().enumerate().filter(|(_, c)| **c == 0).map(|(i, _)| (i + 1).to_string()).collect();
    if !unvisited.is_empty() {
        eprintln!(
            "warning: rungs {} were never visited after burn-in; \
             consider a longer run or an adapted prior",
            unvisited.join(", ")
        );
    }
}

fn run_sample(args: SampleArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let target = parse_target(&require("target", args.target.or(file.target))?)?;
    let ladder = parse_ladder(&require("ladder", args.ladder.or(file.ladder))?)?;
    let seed = require_seed(args.seed, file.seed)?;
    let iters = args.iters.or(file.iters).unwrap_or(50_000);
    let burn_in = args.burn_in.or(file.burn_in).unwrap_or(iters / 10);
    let kernel = KernelConfig {
        base_step: args.base_step.or(file.base_step).unwrap_or(1.0),
        step_rule: args.step_rule.map(StepRule::from).or(file.step_rule).unwrap_or(StepRule::InverseSqrtK),
        temp_move_prob: args.temp_move_prob.or(file.temp_move_prob).unwrap_or(0.1),
        seed,
        init: file.init.unwrap_or(InitPoint::Origin),
    };
    let prior = match args.prior.or(file.prior) {
        Some(p) => PseudoPrior::load(&p)?,
        None => PseudoPrior::uniform(ladder.len())?,
    };
    let cfg = StConfig { iters, burn_in, kernel: kernel.clone() };
    let trace = st_run(&target, &ladder, &prior, &cfg)?;
    occupancy_to_stderr(&trace);

    if args.out == Path::new("-") {
        eprintln!("writing the trace to stdout; no metadata sidecar is written");
        let mut stdout = io::stdout().lock();
        trace.write_csv(&mut stdout)?;
    } else {
        let meta = TraceMeta {
            target: target.label().to_string(),
            dim: target.dim(),
            ladder: ladder.clone(),
            seed,
            iters,
            burn_in,
            base_step: kernel.base_step,
            step_rule: kernel.step_rule,
            temp_move_prob: kernel.temp_move_prob,
            log_pseudo_prior: prior.log_p().to_vec(),
            chain: None,
        };
        write_csv_file(&args.out, &trace, Some(&meta))?;
        eprintln!("wrote {} and {}", args.out.display(), meta_path(&args.out).display());
    }
    Ok(())
}

fn run_adapt(args: AdaptArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let target = parse_target(&require("target", args.target.or(file.target))?)?;
    let ladder = parse_ladder(&require("ladder", args.ladder.or(file.ladder))?)?;
    let seed = require_seed(args.seed, file.seed)?;
    let stage_iters =
        args.stage_iters.or(file.stage_iters).unwrap_or(200 * ladder.len().max(50));
    let kernel = KernelConfig {
        base_step: args.base_step.or(file.base_step).unwrap_or(1.0),
        step_rule: args.step_rule.map(StepRule::from).or(file.step_rule).unwrap_or(StepRule::InverseSqrtK),
        temp_move_prob: args.temp_move_prob.or(file.temp_move_prob).unwrap_or(0.2),
        seed,
        init: file.init.unwrap_or(InitPoint::Origin),
    };
    let cfg = AdaptConfig {
        stage1_iters: stage_iters,
        stage2_iters: stage_iters,
        c0: args.c0.or(file.c0).unwrap_or(1.0),
        n0: args.n0.or(file.n0),
        kernel,
    };
    let outcome = adapt_pseudo_prior(&target, &ladder, &cfg)?;
    if !outcome.zero_visit_rungs.is_empty() {
        let list: Vec<String> =
            outcome.zero_visit_rungs.iter().map(|r| r.to_string()).collect();
        eprintln!(
            "warning: the pilot never visited rungs {}; their masses are extrapolations — \
             rerun with more --stage-iters or a denser ladder",
            list.join(", ")
        );
    }
    if args.out == Path::new("-") {
        let mut text = String::new();
        for v in outcome.prior.log_p() {
            text.push_str(&format!("{v:?}\n"));
        }
        write_output(&args.out, &text)?;
    } else {
        outcome.prior.save(&args.out)?;
        eprintln!("wrote {}", args.out.display());
    }
    Ok(())
}

fn run_combine(args: CombineArgs) -> Result<()> {
    let mut traces = Vec::with_capacity(args.traces.len());
    for path in &args.traces {
        let (trace, _meta) = read_csv(path)?;
        traces.push(trace);
    }
    if let Some(spec) = &args.target {
        let target = parse_target(spec)?;
        for trace in &traces {
            check_trace_consistency(trace, &target)?;
        }
    }
    let bins = TemperatureBins::from_traces(&traces)?;
    let weights = log_importance_weights(&bins)?;

    if args.lambda.is_some() && args.method != MethodArg::Custom {
        return Err(Error::validation("--lambda only makes sense with --method custom"));
    }
    let (lambda, method) = match args.method {
        MethodArg::Optimal => (lambda_star(&weights)?, Method::Optimal),
        MethodArg::Naive => (naive_lambda(&bins)?, Method::Naive),
        MethodArg::StOnly => (st_lambda(bins.ladder().len()), Method::StOnly),
        MethodArg::Custom => {
            let spec = args
                .lambda
                .as_deref()
                .ok_or_else(|| Error::validation("--method custom requires --lambda"))?;
            (parse_float_list(spec, "lambda")?, Method::Custom)
        }
    };
    let estimand = Estimand::parse(&args.estimand)?;
    let report = combine(&bins, &weights, &lambda, &estimand, method)?;

    if !report.single_sample_rungs.is_empty() {
        let list: Vec<String> =
            report.single_sample_rungs.iter().map(|r| r.to_string()).collect();
        eprintln!(
            "warning: rungs {} hold a single sample each; their per-rung ess is undefined",
            list.join(", ")
        );
    }
    eprintln!(
        "{} estimate: {:.6} (se {:.4}); combined ess {:.1} of {} samples",
        args.estimand, report.estimate, report.se, report.combined_ess, report.t
    );
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::validation(format!("cannot serialise the report: {e}")))?;
    write_output(&args.out, &(json + "\n"))
}

fn run_table(args: TableArgs) -> Result<()> {
    let ratios = match &args.ratios {
        Some(spec) => parse_float_list(spec, "ratios")?,
        None => TABLE_RATIOS.to_vec(),
    };
    let rows = exponent_table(&ratios)?;
    let text = if args.json {
        serde_json::to_string_pretty(&rows)
            .map_err(|e| Error::validation(format!("cannot serialise the table: {e}")))?
            + "\n"
    } else {
        let mut t = format!("{:>10}  {:>8}  {:>8}  {:>8}\n", "sigma/mu", "k_star", "k_minus", "gain");
        for row in &rows {
            t.push_str(&format!(
                "{:>10.4}  {:>8.4}  {:>8.4}  {:>8.3}\n",
                row.ratio, row.k_star, row.k_minus, row.gain
            ));
        }
        t
    };
    write_output(&args.out, &text)
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let ladder = match &args.ladder {
        Some(spec) => parse_ladder(spec)?,
        None => TemperatureLadder::truncated_geometric(10, 0.1)?,
    };
    let cfg = MixtureBenchConfig {
        replicates: args.replicates,
        iters: args.iters,
        burn_in_frac: args.burn_in_frac,
        ladder,
        base_step: args.base_step,
        step_rule: args.step_rule.into(),
        temp_move_prob: args.temp_move_prob,
        adapt_stage_iters: args.adapt_iters,
        seed: args.seed,
    };
    let report = run_mixture_experiment(&cfg)?;
    bench_summary_to_stderr(&report);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::validation(format!("cannot serialise the report: {e}")))?;
    write_output(&args.out, &(json + "\n"))
}

fn bench_summary_to_stderr(report: &MixtureBenchReport) {
    eprintln!(
        "bimodal benchmark: {} replicates x {} iterations, true mean {}",
        report.config.replicates, report.config.iters, report.true_mean
    );
    if !report.zero_visit_rungs.is_empty() {
        eprintln!(
            "warning: adaptation pilot missed rungs {:?}; results are suspect",
            report.zero_visit_rungs
        );
    }
    eprintln!(
        "{:>8}  {:>10}  {:>8}  {:>10}  {:>8}",
        "method", "mean_est", "rmse", "mean_ess", "mean_ks"
    );
    for m in &report.methods {
        let name = match m.method {
            Method::StOnly => "st_only",
            Method::Naive => "naive",
            Method::Optimal => "optimal",
            Method::Custom => "custom",
        };
        eprintln!(
            "{:>8}  {:>10.4}  {:>8.4}  {:>10.1}  {:>8.4}",
            name, m.mean_estimate, m.rmse, m.mean_ess, m.mean_ks
        );
    }
}

fn run_ladder(args: LadderArgs) -> Result<()> {
    let ladder = parse_ladder(&args.spec)?;
    let text = if args.json {
        serde_json::to_string_pretty(&ladder)
            .map_err(|e| Error::validation(format!("cannot serialise the ladder: {e}")))?
            + "\n"
    } else {
        let mut t = String::new();
        for k in ladder.rungs() {
            t.push_str(&format!("{k:?}\n"));
        }
        t
    };
    write_output(&args.out, &text)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => run_sample(args),
        Command::Adapt(args) => run_adapt(args),
        Command::Combine(args) => run_combine(args),
        Command::Table1(args) => run_table(args),
        Command::MixtureBench(args) => run_bench(args),
        Command::Ladder(args) => run_ladder(args),
    }
}

/// Parse arguments, run, and map errors to exit codes (clap itself exits
/// with 2 on usage errors).
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tempest: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_wiring() {
        assert!(Cli::try_parse_from(["tempest", "ladder", "geometric:m=3,delta=1"]).is_ok());
        assert!(Cli::try_parse_from(["tempest", "ladder"]).is_err());
        assert!(Cli::try_parse_from(["tempest", "combine"]).is_err());
        assert!(Cli::try_parse_from([
            "tempest", "sample", "--target", "mixture", "--ladder", "explicit:1", "--seed", "1",
            "--out", "-",
        ])
        .is_ok());
        assert!(Cli::try_parse_from(["tempest", "mixture-bench", "--seed", "4"]).is_ok());
        assert!(Cli::try_parse_from(["tempest", "mixture-bench"]).is_err());
        assert!(Cli::try_parse_from(["tempest", "table1", "--bogus"]).is_err());
    }

    #[test]
    fn float_list_parsing() {
        assert_eq!(parse_float_list("0.5, 0.25,0.25", "lambda").unwrap(), vec![0.5, 0.25, 0.25]);
        let err = parse_float_list("0.5,x", "lambda").unwrap_err().to_string();
        assert!(err.contains("lambda") && err.contains("\"x\""), "{err}");
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"iters": 100, "step": 2.0}"#).unwrap();
        let err = load_config(Some(&path)).unwrap_err().to_string();
        assert!(err.contains("step"), "{err}");

        fs::write(&path, r#"{"seed": 9, "step_rule": "constant"}"#).unwrap();
        let cfg = load_config(Some(&path)).unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.step_rule, Some(StepRule::Constant));
    }

    #[test]
    fn seed_is_mandatory() {
        let err = require_seed(None, None).unwrap_err().to_string();
        assert!(err.contains("--seed"), "{err}");
        assert_eq!(require_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(require_seed(None, Some(4)).unwrap(), 4);
    }
}
