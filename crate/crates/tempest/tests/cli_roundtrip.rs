//! The command-line binary, driven end to end: reproducibility of runs,
//! file formats that round-trip, the adapt → sample → combine pipeline, and
//! exit codes for each failure class.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempest::analysis::{k_star, ExponentRow, MixtureBenchReport};
use tempest::estimator::{CombinationReport, Method};
use tempest::ladder::TemperatureLadder;

fn run<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempest"))
        .args(args)
        .output()
        .expect("the binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit code {code}; stderr:\n{}",
        stderr(out)
    );
}

fn path_str(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn sample_runs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = path_str(dir.path(), "a.csv");
    let b = path_str(dir.path(), "b.csv");
    let args = |out: &str| -> Vec<String> {
        [
            "sample", "--target", "normal(0,1)", "--ladder", "geometric:m=3,delta=0.5",
            "--iters", "4000", "--seed", "3", "--out", out,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let first = run(&args(&a));
    assert_code(&first, 0);
    assert!(stderr(&first).contains("rung occupancy"), "missing occupancy table on stderr");
    let second = run(&args(&b));
    assert_code(&second, 0);

    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "same seed, different trace");
    assert_eq!(
        fs::read(format!("{a}.meta.json")).unwrap(),
        fs::read(format!("{b}.meta.json")).unwrap(),
        "same run, different metadata"
    );

    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("iter,rung,k,logpi,theta0\n"), "unexpected header");
    assert_eq!(text.lines().count(), 1 + 3600, "4000 iterations minus 400 burn-in, plus header");
}

#[test]
fn sample_to_stdout_skips_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tempest"))
        .current_dir(dir.path())
        .args([
            "sample", "--target", "normal(0,1)", "--ladder", "explicit:1,0.5",
            "--iters", "500", "--seed", "1", "--out", "-",
        ])
        .output()
        .unwrap();
    assert_code(&out, 0);
    assert!(stdout(&out).starts_with("iter,rung,k,logpi,theta0\n"));
    assert!(stderr(&out).contains("no metadata sidecar"));
    assert_eq!(
        fs::read_dir(dir.path()).unwrap().count(),
        0,
        "stdout mode must not leave files behind"
    );
}

#[test]
fn single_rung_trace_has_unit_temperature_column() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path_str(dir.path(), "one.csv");
    let out = run(&[
        "sample", "--target", "normal(2,1)", "--ladder", "explicit:1",
        "--iters", "300", "--burn-in", "0", "--seed", "8", "--out", &trace,
    ]);
    assert_code(&out, 0);
    for line in fs::read_to_string(&trace).unwrap().lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1], "1", "rung numbers are 1-based on disk");
        assert_eq!(fields[2], "1.0", "single-rung temperature must be exactly 1.0");
    }
}

#[test]
fn combine_reads_back_what_sample_wrote() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path_str(dir.path(), "t.csv");
    let report_path = path_str(dir.path(), "report.json");
    assert_code(
        &run(&[
            "sample", "--target", "normal(1,2)", "--ladder", "geometric:m=4,delta=0.5",
            "--iters", "20000", "--seed", "5", "--out", &trace,
        ]),
        0,
    );

    // A matching target passes the stored-density recheck; a wrong one is
    // rejected before any combining happens.
    let ok = run(&[
        "combine", "--trace", &trace, "--target", "normal(1,2)", "--out", &report_path,
    ]);
    assert_code(&ok, 0);
    assert!(stderr(&ok).contains("estimate:"));
    let report: CombinationReport =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.method, Method::Optimal);
    assert_eq!(report.t, 18_000);
    assert_eq!(report.counts.iter().sum::<usize>(), 18_000);
    assert!(report.estimate.is_finite());

    let bad = run(&["combine", "--trace", &trace, "--target", "normal(5,2)"]);
    assert_code(&bad, 2);
}

#[test]
fn combination_methods_rank_by_effective_samples() {
    let dir = tempfile::tempdir().unwrap();
    let prior = path_str(dir.path(), "prior.txt");
    let trace = path_str(dir.path(), "mix.csv");
    assert_code(
        &run(&[
            "adapt", "--target", "mixture", "--ladder", "geometric:m=5,kmin=0.1",
            "--stage-iters", "4000", "--base-step", "2.5", "--seed", "2", "--out", &prior,
        ]),
        0,
    );
    assert_code(
        &run(&[
            "sample", "--target", "mixture", "--ladder", "geometric:m=5,kmin=0.1",
            "--iters", "30000", "--base-step", "2.5", "--temp-move-prob", "0.2",
            "--prior", &prior, "--seed", "4", "--out", &trace,
        ]),
        0,
    );

    let mut reports = Vec::new();
    for method in ["optimal", "naive", "st-only"] {
        let path = path_str(dir.path(), &format!("{method}.json"));
        assert_code(&run(&["combine", "--trace", &trace, "--method", method, "--out", &path]), 0);
        let r: CombinationReport =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        reports.push(r);
    }
    let (optimal, naive, st_only) = (&reports[0], &reports[1], &reports[2]);
    assert!(optimal.combined_ess_raw >= naive.combined_ess_raw - 1e-9);
    assert!(optimal.combined_ess_raw >= st_only.combined_ess_raw - 1e-9);
    // All three reweight the same samples toward the same target, so the
    // estimates must roughly agree.
    assert!((optimal.estimate - naive.estimate).abs() < 2.0);
    assert!((optimal.estimate - st_only.estimate).abs() < 2.0);
}

#[test]
fn custom_combinations_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path_str(dir.path(), "t.csv");
    assert_code(
        &run(&[
            "sample", "--target", "normal(0,1)", "--ladder", "explicit:1,0.5",
            "--iters", "2000", "--seed", "1", "--out", &trace,
        ]),
        0,
    );

    // Weights that do not form a probability vector.
    assert_code(
        &run(&["combine", "--trace", &trace, "--method", "custom", "--lambda", "0.9,0.3"]),
        2,
    );
    // --lambda without the custom method.
    assert_code(
        &run(&["combine", "--trace", &trace, "--method", "optimal", "--lambda", "0.5,0.5"]),
        2,
    );
    // The custom method without --lambda.
    assert_code(&run(&["combine", "--trace", &trace, "--method", "custom"]), 2);
    // A proper probability vector is accepted.
    assert_code(
        &run(&["combine", "--trace", &trace, "--method", "custom", "--lambda", "0.5,0.5"]),
        0,
    );
}

#[test]
fn adapting_a_single_rung_is_trivial() {
    let out = run(&["adapt", "--target", "normal(0,1)", "--ladder", "explicit:1", "--seed", "1"]);
    assert_code(&out, 0);
    assert_eq!(stdout(&out), "0.0\n");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"target": "normal(0,1)", "ladder": "explicit:1,0.5", "iters": 1000, "seed": 9}"#,
    )
    .unwrap();
    let cfg_str = cfg.to_str().unwrap();

    let trace = path_str(dir.path(), "cfg.csv");
    assert_code(&run(&["sample", "--config", cfg_str, "--out", &trace]), 0);
    // 1000 iterations, default burn-in of a tenth.
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 1 + 900);

    let trace2 = path_str(dir.path(), "cfg2.csv");
    assert_code(&run(&["sample", "--config", cfg_str, "--iters", "600", "--out", &trace2]), 0);
    assert_eq!(fs::read_to_string(&trace2).unwrap().lines().count(), 1 + 540);

    // Unknown keys are rejected loudly rather than silently ignored.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"target": "normal(0,1)", "oops": 1}"#).unwrap();
    let out = run(&["sample", "--config", bad.to_str().unwrap(), "--out", "-"]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("oops"));
}

#[test]
fn bench_report_round_trips_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = path_str(dir.path(), "bench.json");
    let out = run(&[
        "mixture-bench", "--seed", "42", "--replicates", "3", "--iters", "4000",
        "--ladder", "geometric:m=5,kmin=0.1", "--adapt-iters", "1000", "--out", &path,
    ]);
    assert_code(&out, 0);
    assert!(stderr(&out).contains("bimodal benchmark"));
    let report: MixtureBenchReport =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.replicates.len(), 3);
    assert_eq!(report.methods.len(), 3);
    assert!((report.true_mean - -1.6).abs() < 1e-12);

    // The benchmark is deterministic in its seed.
    let path2 = path_str(dir.path(), "bench2.json");
    let rerun = run(&[
        "mixture-bench", "--seed", "42", "--replicates", "3", "--iters", "4000",
        "--ladder", "geometric:m=5,kmin=0.1", "--adapt-iters", "1000", "--out", &path2,
    ]);
    assert_code(&rerun, 0);
    assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
}

#[test]
fn exponent_table_matches_the_library() {
    let out = run(&["table1", "--ratios", "0.25,1", "--json"]);
    assert_code(&out, 0);
    let rows: Vec<ExponentRow> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert!((row.k_star - k_star(1.0, row.ratio).unwrap()).abs() < 1e-12);
        assert!(row.k_minus < row.k_star);
        assert!(row.gain >= 1.0);
    }

    let text = run(&["table1", "--ratios", "1"]);
    assert_code(&text, 0);
    let body = stdout(&text);
    assert!(body.contains("sigma/mu"), "missing table header:\n{body}");
    assert_eq!(body.lines().count(), 2);
}

#[test]
fn ladder_subcommand_prints_rungs() {
    let out = run(&["ladder", "geometric:m=4,delta=1"]);
    assert_code(&out, 0);
    assert_eq!(stdout(&out), "1.0\n0.5\n0.25\n0.125\n");

    let json = run(&["ladder", "geometric:m=4,delta=1", "--json"]);
    assert_code(&json, 0);
    let ladder: TemperatureLadder = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(ladder, TemperatureLadder::geometric(4, 1.0).unwrap());
}

#[test]
fn failure_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // Validation problems exit 2.
    let bad_ladder = run(&["ladder", "staircase:m=3"]);
    assert_code(&bad_ladder, 2);
    assert!(stderr(&bad_ladder).starts_with("tempest:"));

    let no_seed = run(&[
        "sample", "--target", "normal(0,1)", "--ladder", "explicit:1", "--out", "-",
    ]);
    assert_code(&no_seed, 2);
    assert!(stderr(&no_seed).contains("--seed"), "the error should point at the missing flag");

    // Missing or unwritable files exit 4.
    let missing_config = run(&[
        "sample", "--config", &path_str(dir.path(), "absent.json"), "--out", "-",
    ]);
    assert_code(&missing_config, 4);

    let missing_trace = run(&["combine", "--trace", &path_str(dir.path(), "absent.csv")]);
    assert_code(&missing_trace, 4);

    let unwritable = run(&[
        "sample", "--target", "normal(0,1)", "--ladder", "explicit:1",
        "--iters", "100", "--seed", "1",
        "--out", &path_str(&dir.path().join("no-such-dir"), "t.csv"),
    ]);
    assert_code(&unwritable, 4);

    // Clap usage errors exit 2 as well.
    let usage = run(&["combine"]);
    assert_code(&usage, 2);
}
