//! CSV traces and JSON summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{IterationRecord, Solution};

pub const TRACE_HEADER: &str = "k,gamma,tau,backtracks,res_inf,ame,x_updates,z_updates,time_ms";

/// Float with 17 significant digits; parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| Error::Config(format!("not a number: '{s}'"))),
    }
}

pub fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.gamma),
            fmt_f64(r.tau),
            r.backtracks,
            fmt_f64(r.res_inf),
            fmt_f64(r.ame),
            r.x_updates,
            r.z_updates,
            fmt_f64(r.time_ms)
        );
    }
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Config("trace file has an unexpected header".into()));
    }
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Config(format!("not an integer: '{s}'")))
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Config(format!("trace row has {} fields: '{line}'", f.len())));
            }
            Ok(IterationRecord {
                k: int(f[0])?,
                gamma: parse_f64(f[1])?,
                tau: parse_f64(f[2])?,
                backtracks: int(f[3])?,
                res_inf: parse_f64(f[4])?,
                ame: parse_f64(f[5])?,
                x_updates: int(f[6])?,
                z_updates: int(f[7])?,
                time_ms: parse_f64(f[8])?,
            })
        })
        .collect()
}

/// Work statistics over a set of solves (or closed-loop steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkStats {
    pub count: usize,
    pub avg_iterations: f64,
    pub max_iterations: usize,
    pub avg_x_updates: f64,
    pub max_x_updates: usize,
    pub avg_z_updates: f64,
    pub max_z_updates: usize,
    pub avg_time_ms: f64,
    pub max_time_ms: f64,
}

impl WorkStats {
    /// Aggregates per-solve traces. Sums run in input order so the result is
    /// reproducible from the trace files.
    pub fn from_traces<'a, I>(traces: I) -> Self
    where
        I: IntoIterator<Item = &'a [IterationRecord]>,
    {
        let mut s = WorkStats {
            count: 0,
            avg_iterations: 0.0,
            max_iterations: 0,
            avg_x_updates: 0.0,
            max_x_updates: 0,
            avg_z_updates: 0.0,
            max_z_updates: 0,
            avg_time_ms: 0.0,
            max_time_ms: 0.0,
        };
        let (mut it, mut xu, mut zu, mut t) = (0usize, 0usize, 0usize, 0.0);
        for recs in traces {
            let x: usize = recs.iter().map(|r| r.x_updates).sum();
            let z: usize = recs.iter().map(|r| r.z_updates).sum();
            let ms: f64 = recs.iter().map(|r| r.time_ms).sum();
            s.count += 1;
            it += recs.len();
            xu += x;
            zu += z;
            t += ms;
            s.max_iterations = s.max_iterations.max(recs.len());
            s.max_x_updates = s.max_x_updates.max(x);
            s.max_z_updates = s.max_z_updates.max(z);
            s.max_time_ms = s.max_time_ms.max(ms);
        }
        if s.count > 0 {
            let n = s.count as f64;
            s.avg_iterations = it as f64 / n;
            s.avg_x_updates = xu as f64 / n;
            s.avg_z_updates = zu as f64 / n;
            s.avg_time_ms = t / n;
        }
        s
    }
}

/// JSON summary of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub solver: String,
    pub status: String,
    pub message: Option<String>,
    pub iterations: usize,
    pub residual_inf: f64,
    pub gamma: f64,
    pub x_updates: usize,
    pub z_updates: usize,
    pub time_ms: f64,
    pub x: Vec<f64>,
    /// Dual solution in the unscaled variables.
    pub y: Vec<f64>,
}

impl SolveSummary {
    pub fn new(solver: &str, sol: &Solution, y_unscaled: &nalgebra::DVector<f64>) -> Self {
        Self {
            solver: solver.to_string(),
            status: sol.status.to_string(),
            message: sol.trace.message.clone(),
            iterations: sol.iterations(),
            residual_inf: sol.residual_inf,
            gamma: sol.gamma,
            x_updates: sol.trace.x_updates(),
            z_updates: sol.trace.z_updates(),
            time_ms: sol.trace.time_ms(),
            x: sol.x.iter().copied().collect(),
            y: y_unscaled.iter().copied().collect(),
        }
    }
}
