//! Inverse-temperature ladders `1 = k_1 > k_2 > ... > k_m >= 0`.
//!
//! Two standard spacings are provided. With spacing parameter `Delta > 0`:
//!
//! * geometric: `k_i = (1 + Delta)^(1 - i)` — uniform on the log scale;
//! * harmonic:  `k_i = 1 / (1 + Delta (i - 1))` — uniform in `1/k`.
//!
//! [`TemperatureLadder::truncated_geometric`] picks the geometric `Delta`
//! that lands the last rung exactly on a requested `k_min`, which is the
//! usual way to bound how flat the hottest distribution gets.

use crate::error::{Error, Result};

/// How a ladder's rungs were spaced. Retained as metadata so that traces
/// can report how they were produced.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacing {
    Geometric { delta: f64 },
    Harmonic { delta: f64 },
    Explicit,
}

/// A validated inverse-temperature ladder.
///
/// Invariants enforced at construction: the first rung is exactly 1, rungs
/// are finite and strictly decreasing, and the last rung is nonnegative.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TemperatureLadder {
    rungs: Vec<f64>,
    spacing: Spacing,
}

impl TemperatureLadder {
    /// Geometric ladder with `m` rungs and spacing `delta`.
    pub fn geometric(m: usize, delta: f64) -> Result<Self> {
        check_spacing(m, delta)?;
        let base = 1.0 + delta;
        let rungs = (0..m).map(|i| base.powi(-(i as i32))).collect();
        Self::from_rungs(rungs, Spacing::Geometric { delta })
    }

    /// Harmonic ladder with `m` rungs and spacing `delta`.
    pub fn harmonic(m: usize, delta: f64) -> Result<Self> {
        check_spacing(m, delta)?;
        let rungs = (0..m).map(|i| 1.0 / (1.0 + delta * i as f64)).collect();
        Self::from_rungs(rungs, Spacing::Harmonic { delta })
    }

    /// Geometric ladder whose last rung lands exactly on `k_min`,
    /// i.e. spacing `delta = k_min^(-1/(m-1)) - 1`.
    pub fn truncated_geometric(m: usize, k_min: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::validation(
                "truncated geometric ladder needs at least 2 rungs",
            ));
        }
        if !(k_min > 0.0 && k_min < 1.0) {
            return Err(Error::validation(format!(
                "k_min must lie strictly between 0 and 1, got {k_min}"
            )));
        }
        let exponent = 1.0 / (m - 1) as f64;
        let delta = k_min.powf(-exponent) - 1.0;
        // k_i = k_min^((i-1)/(m-1)) hits both endpoints exactly and equals
        // (1 + delta)^(1 - i) up to rounding.
        let rungs = (0..m).map(|i| k_min.powf(i as f64 * exponent)).collect();
        Self::from_rungs(rungs, Spacing::Geometric { delta })
    }

    /// Ladder from explicit rungs; the full invariant set is checked.
    pub fn explicit(rungs: Vec<f64>) -> Result<Self> {
        Self::from_rungs(rungs, Spacing::Explicit)
    }

    fn from_rungs(rungs: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if rungs.is_empty() {
            return Err(Error::validation("ladder must have at least one rung"));
        }
        if rungs[0] != 1.0 {
            return Err(Error::validation(format!(
                "first rung must be exactly 1, got {}",
                rungs[0]
            )));
        }
        for w in rungs.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::validation(format!(
                    "rungs must be strictly decreasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let last = *rungs.last().expect("nonempty");
        if !last.is_finite() || last < 0.0 {
            return Err(Error::validation(format!(
                "last rung must be finite and nonnegative, got {last}"
            )));
        }
        Ok(TemperatureLadder { rungs, spacing })
    }

    pub fn rungs(&self) -> &[f64] {
        &self.rungs
    }

    /// Number of rungs `m`.
    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a validated ladder always has at least one rung
    }

    /// Inverse temperature of rung `i` (0-based).
    pub fn k(&self, i: usize) -> f64 {
        self.rungs[i]
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// True when the hottest rung is `k = 0`, i.e. the flattened density is
    /// improper unless the state space is bounded. Callers may want to warn.
    pub fn has_zero_rung(&self) -> bool {
        *self.rungs.last().expect("nonempty") == 0.0
    }
}

fn check_spacing(m: usize, delta: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::validation("ladder must have at least one rung"));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::validation(format!(
            "spacing delta must be finite and positive, got {delta}"
        )));
    }
    Ok(())
}

/// Parse a ladder spec string.
///
/// Grammar (all on one line):
/// `geometric:m=40,delta=0.0608` | `geometric:m=40,kmin=0.1` |
/// `harmonic:m=10,delta=0.5` | `explicit:1,0.7,0.4,0.1`
pub fn parse_ladder(s: &str) -> Result<TemperatureLadder> {
    let s = s.trim();
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| Error::validation(format!("ladder spec `{s}` is missing `kind:`")))?;
    match kind {
        "explicit" => {
            let rungs: Result<Vec<f64>> = rest
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::validation(format!("bad rung `{p}` in `{s}`")))
                })
                .collect();
            TemperatureLadder::explicit(rungs?)
        }
        "geometric" | "harmonic" => {
            let mut m: Option<usize> = None;
            let mut delta: Option<f64> = None;
            let mut kmin: Option<f64> = None;
            for pair in rest.split(',') {
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::validation(format!("expected key=value, got `{pair}`")))?;
                match key.trim() {
                    "m" => {
                        m = Some(value.trim().parse().map_err(|_| {
                            Error::validation(format!("bad rung count `{value}` in `{s}`"))
                        })?)
                    }
                    "delta" => {
                        delta = Some(value.trim().parse().map_err(|_| {
                            Error::validation(format!("bad delta `{value}` in `{s}`"))
                        })?)
                    }
                    "kmin" => {
                        kmin = Some(value.trim().parse().map_err(|_| {
                            Error::validation(format!("bad kmin `{value}` in `{s}`"))
                        })?)
                    }
                    other => {
                        return Err(Error::validation(format!(
                            "unknown ladder parameter `{other}` in `{s}`"
                        )))
                    }
                }
            }
            let m = m.ok_or_else(|| Error::validation(format!("ladder spec `{s}` is missing m")))?;
            match (kind, delta, kmin) {
                ("geometric", Some(d), None) => TemperatureLadder::geometric(m, d),
                ("geometric", None, Some(k)) => TemperatureLadder::truncated_geometric(m, k),
                ("geometric", Some(_), Some(_)) => Err(Error::validation(
                    "geometric ladder takes delta or kmin, not both".to_string(),
                )),
                ("geometric", None, None) => Err(Error::validation(
                    "geometric ladder needs delta or kmin".to_string(),
                )),
                ("harmonic", Some(d), None) => TemperatureLadder::harmonic(m, d),
                ("harmonic", _, _) => Err(Error::validation(
                    "harmonic ladder takes exactly m and delta".to_string(),
                )),
                _ => unreachable!(),
            }
        }
        other => Err(Error::validation(format!(
            "unknown ladder kind `{other}` (expected geometric, harmonic or explicit)"
        ))),
    }
}
