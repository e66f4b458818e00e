//! Retained samples and their on-disk format.
//!
//! A trace is stored as CSV with header `iter,rung,k,logpi,theta0[,theta1,...]`,
//! one row per retained iteration. `rung` is 1-based in the file (cold rung
//! is 1); in memory rung indices are 0-based. Floats are written in
//! shortest-roundtrip form, so writing, reading, and writing again is
//! byte-identical and no precision is lost.
//!
//! Next to the CSV, [`write_csv_file`] drops a `<name>.meta.json` sidecar
//! with the run parameters, most importantly the full temperature ladder.
//! [`read_csv`] uses the sidecar when present; without it the ladder is
//! reconstructed from the `rung`/`k` columns, which only works if every
//! rung up to the largest one mentioned was visited.

use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::TemperatureLadder;
use crate::target::TargetDensity;

use super::StepRule;

/// One retained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Iteration index within the run (burn-in iterations are not retained,
    /// so the first record of a run with burn-in `b` has `iter == b`).
    pub iter: usize,
    /// Rung index, 0-based, cold first.
    pub rung: usize,
    pub theta: Vec<f64>,
    /// Log density of `theta` under the cold target.
    pub log_pi: f64,
}

/// Run parameters stored in the sidecar next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub target: String,
    pub dim: usize,
    pub ladder: TemperatureLadder,
    pub seed: u64,
    pub iters: usize,
    pub burn_in: usize,
    pub base_step: f64,
    pub step_rule: StepRule,
    pub temp_move_prob: f64,
    pub log_pseudo_prior: Vec<f64>,
    /// Chain index for traces produced by a coupled (multi-chain) run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<usize>,
}

/// A tempered run's retained samples, with the ladder they refer to.
#[derive(Debug, Clone)]
pub struct TemperedTrace {
    ladder: TemperatureLadder,
    dim: usize,
    records: Vec<TraceRecord>,
}

impl TemperedTrace {
    pub fn new(ladder: TemperatureLadder, dim: usize, records: Vec<TraceRecord>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("trace dimension must be at least 1"));
        }
        for (n, rec) in records.iter().enumerate() {
            if rec.rung >= ladder.len() {
                return Err(Error::validation(format!(
                    "record {}: rung index {} out of range for a {}-rung ladder",
                    n + 1,
                    rec.rung,
                    ladder.len()
                )));
            }
            if rec.theta.len() != dim {
                return Err(Error::validation(format!(
                    "record {}: point has {} coordinates, expected {dim}",
                    n + 1,
                    rec.theta.len()
                )));
            }
        }
        Ok(TemperedTrace { ladder, dim, records })
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.ladder
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Write the CSV representation to any writer.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "iter,rung,k,logpi")?;
        for d in 0..self.dim {
            write!(w, ",theta{d}")?;
        }
        writeln!(w)?;
        for rec in &self.records {
            write!(
                w,
                "{},{},{:?},{:?}",
                rec.iter,
                rec.rung + 1,
                self.ladder.k(rec.rung),
                rec.log_pi
            )?;
            for x in &rec.theta {
                write!(w, ",{x:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Sidecar path for a trace CSV: `<path>.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.json", csv.display()))
}

/// Write a trace CSV and, when `meta` is given, its sidecar.
pub fn write_csv_file(path: &Path, trace: &TemperedTrace, meta: Option<&TraceMeta>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    trace.write_csv(&mut w)?;
    io::Write::flush(&mut w)?;
    if let Some(meta) = meta {
        let json = serde_json::to_string_pretty(meta)
            .map_err(|e| Error::validation(format!("cannot serialise trace metadata: {e}")))?;
        fs::write(meta_path(path), json + "\n")?;
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field.trim().parse().map_err(|e| {
        Error::validation(format!("line {line}: cannot parse {what} from {field:?}: {e}"))
    })
}

/// Read a trace CSV, preferring the `<path>.meta.json` sidecar for the
/// ladder and returning the sidecar contents when present.
pub fn read_csv(path: &Path) -> Result<(TemperedTrace, Option<TraceMeta>)> {
    let meta = match fs::read_to_string(meta_path(path)) {
        Ok(text) => Some(serde_json::from_str::<TraceMeta>(&text).map_err(|e| {
            Error::validation(format!("invalid trace sidecar {}: {e}", meta_path(path).display()))
        })?),
        Err(e) if e.kind() == io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };

    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::validation(format!("{}: empty trace file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[0] != "iter" || cols[1] != "rung" || cols[2] != "k" || cols[3] != "logpi"
    {
        return Err(Error::validation(format!(
            "line 1: expected header iter,rung,k,logpi,theta0,... got {header:?}"
        )));
    }
    let dim = cols.len() - 4;
    for (d, col) in cols[4..].iter().enumerate() {
        if *col != format!("theta{d}") {
            return Err(Error::validation(format!(
                "line 1: expected column theta{d}, got {col:?}"
            )));
        }
    }

    let mut records = Vec::new();
    let mut seen_k: Vec<(usize, f64)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::validation(format!(
                "line {lineno}: expected {} fields, got {}",
                cols.len(),
                fields.len()
            )));
        }
        let iter: usize = parse_field(fields[0], lineno, "iteration")?;
        let rung_1based: usize = parse_field(fields[1], lineno, "rung")?;
        if rung_1based == 0 {
            return Err(Error::validation(format!("line {lineno}: rung indices are 1-based")));
        }
        let rung = rung_1based - 1;
        let k: f64 = parse_field(fields[2], lineno, "inverse temperature")?;
        let log_pi: f64 = parse_field(fields[3], lineno, "log density")?;
        let mut theta = Vec::with_capacity(dim);
        for f in &fields[4..] {
            theta.push(parse_field(*f, lineno, "coordinate")?);
        }
        if let Some(meta) = &meta {
            if rung >= meta.ladder.len() {
                return Err(Error::validation(format!(
                    "line {lineno}: rung {rung_1based} out of range for the sidecar's {}-rung ladder",
                    meta.ladder.len()
                )));
            }
            if (k - meta.ladder.k(rung)).abs() > 1e-9 {
                return Err(Error::validation(format!(
                    "line {lineno}: k = {k} disagrees with the sidecar ladder's {} at rung {rung_1based}",
                    meta.ladder.k(rung)
                )));
            }
        } else {
            match seen_k.iter().find(|(r, _)| *r == rung) {
                Some((_, k0)) if (k - k0).abs() > 1e-9 => {
                    return Err(Error::validation(format!(
                        "line {lineno}: rung {rung_1based} previously had k = {k0}, now {k}"
                    )));
                }
                Some(_) => {}
                None => seen_k.push((rung, k)),
            }
        }
        records.push(TraceRecord { iter, rung, theta, log_pi });
    }

    let ladder = match &meta {
        Some(meta) => meta.ladder.clone(),
        None => {
            seen_k.sort_by_key(|(r, _)| *r);
            let max_rung = seen_k.last().map(|(r, _)| *r).unwrap_or_default();
            if seen_k.len() != max_rung + 1 {
                let missing = (0..=max_rung)
                    .find(|r| !seen_k.iter().any(|(s, _)| s == r))
                    .unwrap();
                return Err(Error::validation(format!(
                    "cannot reconstruct the ladder: rung {} never appears and there is no {} sidecar",
                    missing + 1,
                    meta_path(path).display()
                )));
            }
            TemperatureLadder::explicit(seen_k.iter().map(|(_, k)| *k).collect())?
        }
    };
    if records.is_empty() {
        return Err(Error::validation(format!("{}: trace has no records", path.display())));
    }

    let dim_final = if let Some(meta) = &meta { meta.dim } else { dim };
    if dim_final != dim {
        return Err(Error::validation(format!(
            "trace has {dim} coordinates per point but the sidecar says {dim_final}"
        )));
    }
    Ok((TemperedTrace::new(ladder, dim, records)?, meta))
}

/// Recompute each record's log density and fail on the first mismatch.
/// Catches traces paired with the wrong target (or edited files).
pub fn check_trace_consistency(trace: &TemperedTrace, target: &TargetDensity) -> Result<()> {
    if target.dim() != trace.dim() {
        return Err(Error::validation(format!(
            "target has dimension {}, trace has {}",
            target.dim(),
            trace.dim()
        )));
    }
    for (n, rec) in trace.records().iter().enumerate() {
        let lp = target.log_density(&rec.theta);
        let tol = 1e-8 * rec.log_pi.abs().max(1.0);
        if (lp - rec.log_pi).abs() > tol {
            return Err(Error::validation(format!(
                "record {} (iteration {}): stored log density {} but the target gives {lp}; \
                 this trace was not produced by target {:?}",
                n + 1,
                rec.iter,
                rec.log_pi,
                target.label()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::make_normal;

    fn small_trace() -> TemperedTrace {
        let ladder = TemperatureLadder::geometric(3, 1.0).unwrap();
        let records = vec![
            TraceRecord { iter: 5, rung: 2, theta: vec![0.125], log_pi: -1.5 },
            TraceRecord { iter: 6, rung: 1, theta: vec![-2.0], log_pi: -2.9189385332046727 },
            TraceRecord { iter: 7, rung: 0, theta: vec![0.3333333333333333], log_pi: -0.97 },
        ];
        TemperedTrace::new(ladder, 1, records).unwrap()
    }

    fn meta_for(trace: &TemperedTrace) -> TraceMeta {
        TraceMeta {
            target: "normal(0,1)".into(),
            dim: trace.dim(),
            ladder: trace.ladder().clone(),
            seed: 42,
            iters: 8,
            burn_in: 5,
            base_step: 1.0,
            step_rule: StepRule::InverseSqrtK,
            temp_move_prob: 0.1,
            log_pseudo_prior: vec![0.0, -0.5, -1.0],
            chain: None,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let trace = small_trace();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,rung,k,logpi,theta0");
        // Rungs are 1-based on disk and carry their k.
        assert_eq!(lines.next().unwrap(), "5,3,0.25,-1.5,0.125");
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = small_trace();
        write_csv_file(&path, &trace, Some(&meta_for(&trace))).unwrap();
        let first = fs::read(&path).unwrap();

        let (back, meta) = read_csv(&path).unwrap();
        assert_eq!(back.records(), trace.records());
        assert_eq!(meta.unwrap().ladder, *trace.ladder());

        let path2 = dir.path().join("trace2.csv");
        write_csv_file(&path2, &back, None).unwrap();
        assert_eq!(fs::read(&path2).unwrap(), first);
    }

    #[test]
    fn read_without_sidecar_reconstructs_ladder() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_csv_file(&path, &small_trace(), None).unwrap();
        let (back, meta) = read_csv(&path).unwrap();
        assert!(meta.is_none());
        assert_eq!(back.ladder().rungs(), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn read_without_sidecar_fails_on_unvisited_rung() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let ladder = TemperatureLadder::geometric(3, 1.0).unwrap();
        let records = vec![
            TraceRecord { iter: 0, rung: 0, theta: vec![0.0], log_pi: -0.9 },
            TraceRecord { iter: 1, rung: 2, theta: vec![0.0], log_pi: -0.9 },
        ];
        let trace = TemperedTrace::new(ladder, 1, records).unwrap();
        write_csv_file(&path, &trace, None).unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("rung 2 never appears"), "{err}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "iter,rung,k,logpi,theta0\n0,1,1.0,-0.5,0.1\n1,1,1.0,oops,0.2\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("log density"), "{err}");

        fs::write(&path, "iter,rung,k,logpi\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");

        fs::write(&path, "iter,rung,k,logpi,theta0\n0,1,1.0,-0.5\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("expected 5 fields"), "{err}");

        fs::write(&path, "iter,rung,k,logpi,theta0\n0,0,1.0,-0.5,0.1\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("1-based"), "{err}");
    }

    #[test]
    fn sidecar_k_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = small_trace();
        write_csv_file(&path, &trace, Some(&meta_for(&trace))).unwrap();
        // Corrupt the k column of the first data row.
        let text = fs::read_to_string(&path).unwrap();
        let corrupted = text.replace("5,3,0.25", "5,3,0.3");
        fs::write(&path, corrupted).unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("disagrees"), "{err}");
    }

    #[test]
    fn consistency_check_catches_wrong_target() {
        let ladder = TemperatureLadder::explicit(vec![1.0]).unwrap();
        let target = make_normal(0.0, 1.0).unwrap();
        let good = TemperedTrace::new(
            ladder.clone(),
            1,
            vec![TraceRecord {
                iter: 0,
                rung: 0,
                theta: vec![0.5],
                log_pi: target.log_density(&[0.5]),
            }],
        )
        .unwrap();
        assert!(check_trace_consistency(&good, &target).is_ok());

        let other = make_normal(3.0, 1.0).unwrap();
        let err = check_trace_consistency(&good, &other).unwrap_err().to_string();
        assert!(err.contains("record 1"), "{err}");
    }

    #[test]
    fn trace_validation() {
        let ladder = TemperatureLadder::explicit(vec![1.0, 0.5]).unwrap();
        let bad_rung = vec![TraceRecord { iter: 0, rung: 2, theta: vec![0.0], log_pi: 0.0 }];
        assert!(TemperedTrace::new(ladder.clone(), 1, bad_rung).is_err());
        let bad_dim = vec![TraceRecord { iter: 0, rung: 0, theta: vec![0.0, 1.0], log_pi: 0.0 }];
        assert!(TemperedTrace::new(ladder.clone(), 1, bad_dim).is_err());
        assert!(TemperedTrace::new(ladder, 0, vec![]).is_err());
    }
}
