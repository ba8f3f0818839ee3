//! The AFTI-16 and oscillating-masses benchmark suites.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mpc::{
    afti16_scenario_with_horizon, build_problem, masses_initial_states, oscillating_masses,
    run_closed_loop, ClosedLoopConfig, AFTI16_HORIZON,
};
use crate::report::{fmt_f64, trace_csv, WorkStats};
use crate::solver::{solve, IterationRecord, Method, SolveStatus, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Afti16,
    Masses,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Afti16 => "afti16",
            Suite::Masses => "masses",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "afti16" | "afti-16" => Ok(Suite::Afti16),
            "masses" => Ok(Suite::Masses),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub suite: Suite,
    /// Number of actuators for the masses suite.
    pub k: usize,
    pub horizons: Vec<usize>,
    pub solvers: Vec<Method>,
    /// Initial states per horizon (masses).
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub jacobi: bool,
    pub threads: usize,
}

impl BenchConfig {
    pub fn new(suite: Suite) -> Self {
        let solver = SolverConfig {
            record_time: false,
            ..SolverConfig::default()
        };
        match suite {
            Suite::Afti16 => Self {
                suite,
                k: 0,
                horizons: vec![AFTI16_HORIZON],
                solvers: vec![Method::Nama, Method::FastAma],
                samples: 1,
                seed: 0,
                solver,
                jacobi: true,
                threads: 1,
            },
            Suite::Masses => Self {
                suite,
                k: 8,
                horizons: vec![10, 20],
                solvers: vec![Method::Nama, Method::FastAma],
                samples: 10,
                seed: 0,
                solver: SolverConfig { max_iter: 5000, ..solver },
                jacobi: false,
                threads: 1,
            },
        }
    }
}

/// One solve: a closed-loop step (afti16) or an initial state (masses).
#[derive(Debug, Clone)]
pub struct RunRow {
    pub horizon: usize,
    pub instance: usize,
    pub solver: Method,
    pub status: SolveStatus,
    pub residual_inf: f64,
    pub trace: Vec<IterationRecord>,
}

impl RunRow {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn trace_file_name(&self, suite: Suite) -> String {
        format!("{suite}_N{}_{}_{:04}.csv", self.horizon, self.solver, self.instance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub horizon: usize,
    pub instance: usize,
    pub feasible: bool,
    pub x_init: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub horizon: usize,
    pub solver: Method,
    pub converged: usize,
    pub stats: WorkStats,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub suite: Suite,
    pub scenarios: Vec<ScenarioRow>,
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

/// Runs `jobs` on up to `threads` workers; results come back in job order.
fn run_parallel<T, R, F>(jobs: Vec<T>, threads: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = jobs.len();
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return jobs.iter().map(work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = work(&jobs[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("job result missing"))
        .collect()
}

fn summarize(runs: &[RunRow], horizons: &[usize], solvers: &[Method]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &n in horizons {
        for &m in solvers {
            let group: Vec<&RunRow> = runs.iter().filter(|r| r.horizon == n && r.solver == m).collect();
            if group.is_empty() {
                continue;
            }
            out.push(SummaryRow {
                horizon: n,
                solver: m,
                converged: group.iter().filter(|r| r.status == SolveStatus::Converged).count(),
                stats: WorkStats::from_traces(group.iter().map(|r| r.trace.as_slice())),
            });
        }
    }
    out
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.solver.validate()?;
    if cfg.horizons.is_empty() || cfg.solvers.is_empty() {
        return Err(Error::Config("need at least one horizon and one solver".into()));
    }
    match cfg.suite {
        Suite::Afti16 => run_afti16(cfg),
        Suite::Masses => run_masses(cfg),
    }
}

fn run_afti16(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut scenarios = Vec::new();
    let mut jobs = Vec::new();
    for &n in &cfg.horizons {
        if n == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let sc = afti16_scenario_with_horizon(n)?;
        scenarios.push(ScenarioRow {
            horizon: n,
            instance: 0,
            feasible: true,
            x_init: sc.x0.iter().copied().collect(),
        });
        for &m in &cfg.solvers {
            jobs.push((n, m));
        }
    }
    let results = run_parallel(jobs, cfg.threads, |&(n, m)| -> Result<Vec<RunRow>> {
        let sc = afti16_scenario_with_horizon(n)?;
        let cl = ClosedLoopConfig {
            method: m,
            solver: cfg.solver.clone(),
            jacobi: cfg.jacobi,
            warm_start: true,
        };
        let res = run_closed_loop(sc.steps(), &sc.x0, |k, x| sc.spec_at(k, x), &cl)?;
        Ok(res
            .stats
            .iter()
            .zip(res.traces)
            .map(|(s, t)| RunRow {
                horizon: n,
                instance: s.step,
                solver: m,
                status: s.status,
                residual_inf: s.residual_inf,
                trace: t.records,
            })
            .collect())
    });
    let mut runs = Vec::new();
    for r in results {
        runs.extend(r?);
    }
    let summary = summarize(&runs, &cfg.horizons, &cfg.solvers);
    Ok(BenchReport {
        suite: cfg.suite,
        scenarios,
        runs,
        summary,
    })
}

fn run_masses(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut scenarios = Vec::new();
    let mut jobs = Vec::new();
    for &n in &cfg.horizons {
        let spec = oscillating_masses(cfg.k, n)?;
        match masses_initial_states(&spec, cfg.samples, cfg.seed.wrapping_add(n as u64)) {
            Ok(states) => {
                for (i, x) in states.into_iter().enumerate() {
                    scenarios.push(ScenarioRow {
                        horizon: n,
                        instance: i,
                        feasible: true,
                        x_init: x.iter().copied().collect(),
                    });
                    for &m in &cfg.solvers {
                        jobs.push((spec.clone(), i, x.clone(), m));
                    }
                }
            }
            Err(_) => scenarios.push(ScenarioRow {
                horizon: n,
                instance: 0,
                feasible: false,
                x_init: Vec::new(),
            }),
        }
    }
    let results = run_parallel(jobs, cfg.threads, |(spec, i, x, m)| -> Result<RunRow> {
        let mut problem = build_problem(&spec.with_initial_state(x.clone()))?;
        if cfg.jacobi {
            problem = problem.jacobi_scaled()?;
        }
        let sol = solve(&problem, *m, &cfg.solver, &DVector::zeros(problem.dual_dim()))?;
        Ok(RunRow {
            horizon: spec.horizon(),
            instance: *i,
            solver: *m,
            status: sol.status,
            residual_inf: sol.residual_inf,
            trace: sol.trace.records,
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize(&runs, &cfg.horizons, &cfg.solvers);
    Ok(BenchReport {
        suite: cfg.suite,
        scenarios,
        runs,
        summary,
    })
}

pub const SUMMARY_HEADER: &str = "suite,N,solver,runs,converged,avg_iter,max_iter,avg_x_updates,max_x_updates,avg_z_updates,max_z_updates,avg_time_ms,max_time_ms";
pub const RUNS_HEADER: &str = "suite,N,instance,solver,status,iterations,x_updates,z_updates,time_ms,res_inf";
pub const SCENARIOS_HEADER: &str = "suite,N,instance,feasible,x_init_inf";

impl BenchReport {
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in &self.summary {
            let s = &r.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.suite,
                r.horizon,
                r.solver,
                s.count,
                r.converged,
                fmt_f64(s.avg_iterations),
                s.max_iterations,
                fmt_f64(s.avg_x_updates),
                s.max_x_updates,
                fmt_f64(s.avg_z_updates),
                s.max_z_updates,
                fmt_f64(s.avg_time_ms),
                fmt_f64(s.max_time_ms)
            );
        }
        out
    }

    /// Long format: one line per solve, ready for plotting.
    pub fn runs_csv(&self) -> String {
        let mut out = format!("{RUNS_HEADER}\n");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.suite,
                r.horizon,
                r.instance,
                r.solver,
                r.status,
                r.iterations(),
                r.trace.iter().map(|t| t.x_updates).sum::<usize>(),
                r.trace.iter().map(|t| t.z_updates).sum::<usize>(),
                fmt_f64(r.trace.iter().map(|t| t.time_ms).sum()),
                fmt_f64(r.residual_inf)
            );
        }
        out
    }

    pub fn scenarios_csv(&self) -> String {
        let mut out = format!("{SCENARIOS_HEADER}\n");
        for s in &self.scenarios {
            let inf = s.x_init.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.suite,
                s.horizon,
                s.instance,
                s.feasible,
                fmt_f64(inf)
            );
        }
        out
    }

    /// Writes `summary.csv`, `runs.csv`, `scenarios.csv` and `traces/*.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let traces = dir.join("traces");
        std::fs::create_dir_all(&traces)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        std::fs::write(dir.join("scenarios.csv"), self.scenarios_csv())?;
        for r in &self.runs {
            std::fs::write(traces.join(r.trace_file_name(self.suite)), trace_csv(&r.trace))?;
        }
        Ok(())
    }
}
