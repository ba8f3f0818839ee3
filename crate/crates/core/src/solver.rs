//! AMA, fast AMA and NAMA.
//!
//! All three share the same building blocks: an x-step, a z-step and the
//! envelope value at the current dual point. NAMA adds a line search over
//! the envelope along a blend of a quasi-Newton direction and the AMA step.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;

use crate::directions::{DirectionProvider, DirectionState, EngineKind, SecantPair, DEFAULT_MEMORY};
use crate::envelope::IterateCache;
use crate::error::{check_dim, Error, Result};
use crate::problem::Problem;

const GAMMA_FLOOR: f64 = 1e-16;
const ACCEPT_RTOL: f64 = 1e-12;
const BACKTRACK_RTOL: f64 = 1e-12;

/// Stepsize policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    /// `0.95 / L` with `L` the dual Lipschitz estimate of the problem.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: GammaPolicy,
    /// Line-search reduction factor.
    pub beta: f64,
    pub tau_min: f64,
    /// Termination threshold on `‖R_γ(y)‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease parameter of γ-backtracking.
    pub alpha: f64,
    pub engine: EngineKind,
    pub memory: usize,
    pub gamma_backtracking: bool,
    /// Record wall-clock time per iteration; off gives reproducible traces.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: GammaPolicy::Auto,
            beta: 0.5,
            tau_min: 1e-3,
            tol: 1e-4,
            max_iter: 10_000,
            alpha: 0.5,
            engine: EngineKind::Lbfgs,
            memory: DEFAULT_MEMORY,
            gamma_backtracking: false,
            record_time: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta = {} must lie in (0, 1)", self.beta));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= 1.0) {
            return bad(format!("tau_min = {} must lie in (0, 1]", self.tau_min));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if let GammaPolicy::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma = {g} must be positive"));
            }
        }
        if self.memory == 0 {
            return bad("memory must be at least 1".into());
        }
        Ok(())
    }

    /// Initial stepsize and whether γ-backtracking is active.
    fn resolve_gamma(&self, problem: &Problem) -> (f64, bool) {
        match self.gamma {
            GammaPolicy::Fixed(g) => (g, self.gamma_backtracking),
            GammaPolicy::Auto => match problem.auto_gamma() {
                Some(g) => (g, self.gamma_backtracking),
                // no curvature information at all: start at 1 and adapt
                None => (1.0, true),
            },
        }
    }
}

/// The three iteration schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Ama,
    FastAma,
    #[default]
    Nama,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ama => "ama",
            Method::FastAma => "fastama",
            Method::Nama => "nama",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ama" => Ok(Method::Ama),
            "fastama" | "fast-ama" | "fast_ama" | "gpad" => Ok(Method::FastAma),
            "nama" => Ok(Method::Nama),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    OracleError,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::OracleError => "oracle_error",
        })
    }
}

impl FromStr for SolveStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(SolveStatus::Converged),
            "max_iter" => Ok(SolveStatus::MaxIter),
            "oracle_error" => Ok(SolveStatus::OracleError),
            other => Err(Error::Config(format!("unknown status '{other}'"))),
        }
    }
}

/// One row of the solve trace: iterate `k` and the work spent on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub gamma: f64,
    /// Accepted line-search stepsize; 1 for AMA steps, 0 on the terminal row
    /// and on τ_min fallbacks.
    pub tau: f64,
    pub backtracks: usize,
    pub res_inf: f64,
    pub ame: f64,
    pub x_updates: usize,
    pub z_updates: usize,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolveStatus,
    pub message: Option<String>,
    pub initial_gamma: f64,
    pub final_gamma: f64,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn x_updates(&self) -> usize {
        self.records.iter().map(|r| r.x_updates).sum()
    }

    pub fn z_updates(&self) -> usize {
        self.records.iter().map(|r| r.z_updates).sum()
    }

    pub fn time_ms(&self) -> f64 {
        self.records.iter().map(|r| r.time_ms).sum()
    }

    /// Number of γ halvings, including those before the first record.
    pub fn gamma_halvings(&self) -> usize {
        (self.initial_gamma / self.final_gamma).log2().round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub y: DVector<f64>,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub residual_inf: f64,
    pub gamma: f64,
    pub status: SolveStatus,
    pub trace: SolveTrace,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.iterations()
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// What happened during one iteration; handed to solve observers.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub k: usize,
    /// Cache at the point the iteration started from (`w^k` for fast AMA).
    pub current: &'a IterateCache,
    /// Line-search point `ỹ^k` (NAMA only).
    pub tilde: Option<&'a IterateCache>,
    /// The next dual iterate `y^{k+1}`.
    pub y_next: &'a DVector<f64>,
    /// Cache at the point the next iteration starts from (`w^{k+1}` for fast AMA).
    pub next: &'a IterateCache,
    pub tau: f64,
    pub fallback: bool,
}

/// Observer hook for diagnostics; called once per completed iteration.
pub type Observer<'o> = &'o mut dyn FnMut(&StepEvent<'_>);

#[derive(Debug, Default, Clone, Copy)]
struct Work {
    x: usize,
    z: usize,
}

struct Recorder {
    initial_gamma: f64,
    last: Instant,
    record_time: bool,
    work: Work,
    records: Vec<IterationRecord>,
}

impl Recorder {
    fn new(record_time: bool) -> Self {
        let now = Instant::now();
        Self {
            initial_gamma: f64::NAN,
            last: now,
            record_time,
            work: Work::default(),
            records: Vec::new(),
        }
    }

    fn push(&mut self, cache: &IterateCache, tau: f64, backtracks: usize) {
        let now = Instant::now();
        let time_ms = if self.record_time {
            (now - self.last).as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.last = now;
        self.records.push(IterationRecord {
            k: self.records.len(),
            gamma: cache.gamma,
            tau,
            backtracks,
            res_inf: cache.residual_inf(),
            ame: cache.ame,
            x_updates: self.work.x,
            z_updates: self.work.z,
            time_ms,
        });
        self.work = Work::default();
    }

    fn finish(
        self,
        cache: &IterateCache,
        status: SolveStatus,
        message: Option<String>,
    ) -> Solution {
        Solution {
            y: cache.y.clone(),
            x: cache.x.clone(),
            z: cache.z.clone(),
            residual_inf: cache.residual_inf(),
            gamma: cache.gamma,
            status,
            trace: SolveTrace {
                records: self.records,
                status,
                message,
                initial_gamma: self.initial_gamma,
                final_gamma: cache.gamma,
            },
        }
    }
}

fn evaluate(problem: &Problem, y: DVector<f64>, gamma: f64, work: &mut Work) -> Result<IterateCache> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dual iterate".into()));
    }
    let x = problem.x_step(&y)?;
    work.x += 1;
    work.z += 1;
    Ok(IterateCache::from_x(problem, y, x, gamma))
}

/// Recomputes the z-step of a cache for a new `γ` (the x-step does not depend on γ).
fn regamma(problem: &Problem, cache: &IterateCache, gamma: f64, work: &mut Work) -> IterateCache {
    work.z += 1;
    IterateCache::from_parts(problem, cache.y.clone(), cache.x.clone(), cache.ax.clone(), gamma)
}

/// Quadratic upper-bound test behind γ-backtracking:
/// true when `f(x) > f(x̄) − ⟨Aᵀȳ, x − x̄⟩ + (αγ/2)‖r‖²`, i.e. γ must shrink.
pub fn sufficient_decrease_violated(
    problem: &Problem,
    x: &DVector<f64>,
    x_bar: &DVector<f64>,
    y_bar: &DVector<f64>,
    r: &DVector<f64>,
    gamma: f64,
    alpha: f64,
) -> bool {
    let lhs = problem.f().value(x);
    let fb = problem.f().value(x_bar);
    let inner = y_bar.dot(&problem.a().apply(&(x - x_bar)));
    let rhs = fb - inner + 0.5 * alpha * gamma * r.norm_squared();
    lhs > rhs + BACKTRACK_RTOL * (1.0 + lhs.abs() + fb.abs())
}

/// Halves γ and resets the direction memory. Errors once γ underflows.
pub fn gamma_backtrack(gamma: f64, directions: &mut dyn DirectionProvider) -> Result<f64> {
    let next = gamma / 2.0;
    if next < GAMMA_FLOOR {
        return Err(Error::GammaUnderflow(next));
    }
    directions.reset();
    directions.set_seed_scale(next);
    Ok(next)
}

/// Line-search result.
#[derive(Debug, Clone)]
pub enum LineSearchOutcome {
    Accepted { tau: f64, tilde: IterateCache },
    /// No `τ ≥ τ_min` passed; the caller performs a plain AMA update.
    Fallback,
}

#[derive(Debug, Clone)]
pub struct LineSearch {
    pub outcome: LineSearchOutcome,
    /// Number of rejected trials.
    pub backtracks: usize,
    pub x_updates: usize,
    pub z_updates: usize,
    /// `x(T_γ(y))`, when the search had to form it.
    pub x_bar: Option<(DVector<f64>, DVector<f64>)>,
}

/// Largest `τ ∈ {1, β, β², …}`, `τ ≥ τ_min`, with `ψ_γ(ỹ) ≤ ψ_γ(y)` where
/// `ỹ = y + τd + γ(1 − τ)(Ax − z)`.
///
/// With an affine x-step every trial reuses `x(y + d)` and `x(T_γ(y))`, so at
/// most two x-steps are spent regardless of the number of trials.
pub fn line_search(
    problem: &Problem,
    cache: &IterateCache,
    d: &DVector<f64>,
    beta: f64,
    tau_min: f64,
) -> Result<LineSearch> {
    line_search_with(problem, cache, d, beta, tau_min, None)
}

fn line_search_with(
    problem: &Problem,
    cache: &IterateCache,
    d: &DVector<f64>,
    beta: f64,
    tau_min: f64,
    mut x_bar: Option<(DVector<f64>, DVector<f64>)>,
) -> Result<LineSearch> {
    check_dim("direction", cache.y.len(), d.len())?;
    let gamma = cache.gamma;
    let mut xs = 0;
    let mut zs = 0;
    if d.iter().all(|v| *v == 0.0) {
        return Ok(LineSearch {
            outcome: LineSearchOutcome::Accepted {
                tau: 1.0,
                tilde: cache.clone(),
            },
            backtracks: 0,
            x_updates: 0,
            z_updates: 0,
            x_bar,
        });
    }
    let threshold = cache.ame + ACCEPT_RTOL * (1.0 + cache.ame.abs());
    let affine = problem.f().is_affine();
    let y_bar = cache.t_gamma();
    let y_full = &cache.y + d;
    let mut x_full: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut tau = 1.0;
    let mut backtracks = 0;
    while tau >= tau_min {
        let y_t = if tau == 1.0 {
            y_full.clone()
        } else {
            &y_bar + (&y_full - &y_bar) * tau
        };
        let (x_t, ax_t) = if tau == 1.0 {
            let x = problem.x_step(&y_t)?;
            xs += 1;
            let ax = problem.a().apply(&x);
            if affine {
                x_full = Some((x.clone(), ax.clone()));
            }
            (x, ax)
        } else if affine {
            if x_bar.is_none() {
                let x = problem.x_step(&y_bar)?;
                xs += 1;
                let ax = problem.a().apply(&x);
                x_bar = Some((x, ax));
            }
            let (xb, axb) = x_bar.as_ref().expect("x_bar set above");
            let (xf, axf) = x_full.as_ref().expect("x_full set at tau = 1");
            (xb * (1.0 - tau) + xf * tau, axb * (1.0 - tau) + axf * tau)
        } else {
            let x = problem.x_step(&y_t)?;
            xs += 1;
            let ax = problem.a().apply(&x);
            (x, ax)
        };
        let tilde = IterateCache::from_parts(problem, y_t, x_t, ax_t, gamma);
        zs += 1;
        if tilde.ame <= threshold {
            return Ok(LineSearch {
                outcome: LineSearchOutcome::Accepted { tau, tilde },
                backtracks,
                x_updates: xs,
                z_updates: zs,
                x_bar,
            });
        }
        backtracks += 1;
        tau *= beta;
    }
    Ok(LineSearch {
        outcome: LineSearchOutcome::Fallback,
        backtracks,
        x_updates: xs,
        z_updates: zs,
        x_bar,
    })
}

fn abort(recorder: Recorder, cache: &IterateCache, err: Error) -> Solution {
    recorder.finish(cache, SolveStatus::OracleError, Some(err.to_string()))
}

fn initial(
    problem: &Problem,
    config: &SolverConfig,
    y0: &DVector<f64>,
    recorder: &mut Recorder,
) -> Result<(IterateCache, bool)> {
    config.validate()?;
    check_dim("initial dual vector", problem.dual_dim(), y0.len())?;
    let (gamma, backtracking) = config.resolve_gamma(problem);
    recorder.initial_gamma = gamma;
    let cache = evaluate(problem, y0.clone(), gamma, &mut recorder.work)?;
    Ok((cache, backtracking))
}

/// NAMA with the quasi-Newton engine selected in `config`.
pub fn nama(problem: &Problem, config: &SolverConfig, y0: &DVector<f64>) -> Result<Solution> {
    let mut dirs = DirectionState::new(config.engine, config.memory);
    nama_with(problem, config, y0, &mut dirs, None)
}

/// NAMA with a caller-supplied direction source and optional observer.
pub fn nama_with(
    problem: &Problem,
    config: &SolverConfig,
    y0: &DVector<f64>,
    directions: &mut dyn DirectionProvider,
    mut observer: Option<Observer<'_>>,
) -> Result<Solution> {
    let mut rec = Recorder::new(config.record_time);
    let (mut cache, backtracking) = initial(problem, config, y0, &mut rec)?;
    directions.set_seed_scale(cache.gamma);
    let mut k = 0;
    loop {
        if !cache.ame.is_finite() && !backtracking {
            let err = Error::NonFinite(format!("envelope value {} at iteration {k}", cache.ame));
            return Ok(abort(rec, &cache, err));
        }
        if cache.residual_inf() <= config.tol {
            rec.push(&cache, 0.0, 0);
            return Ok(rec.finish(&cache, SolveStatus::Converged, None));
        }
        if k >= config.max_iter {
            return Ok(rec.finish(&cache, SolveStatus::MaxIter, None));
        }
        let gamma = cache.gamma;

        let mut x_bar = None;
        if backtracking {
            let y_bar = cache.t_gamma();
            let xb = match problem.x_step(&y_bar) {
                Ok(x) => x,
                Err(e) => return Ok(abort(rec, &cache, e)),
            };
            rec.work.x += 1;
            if !cache.ame.is_finite()
                || sufficient_decrease_violated(problem, &cache.x, &xb, &y_bar, &cache.r, gamma, config.alpha)
            {
                match gamma_backtrack(gamma, directions) {
                    Ok(g) => cache = regamma(problem, &cache, g, &mut rec.work),
                    Err(e) => return Ok(abort(rec, &cache, e)),
                }
                continue;
            }
            let axb = problem.a().apply(&xb);
            x_bar = Some((xb, axb));
        }

        let d = directions.direction(&cache.r);
        let ls = match line_search_with(problem, &cache, &d, config.beta, config.tau_min, x_bar) {
            Ok(ls) => ls,
            Err(e) => return Ok(abort(rec, &cache, e)),
        };
        rec.work.x += ls.x_updates;
        rec.work.z += ls.z_updates;

        let (tau, tilde) = match ls.outcome {
            LineSearchOutcome::Accepted { tau, tilde } => (tau, Some(tilde)),
            LineSearchOutcome::Fallback => (0.0, None),
        };
        let next = match &tilde {
            Some(t) => evaluate(problem, t.t_gamma(), gamma, &mut rec.work),
            None => match ls.x_bar {
                Some((xb, axb)) => {
                    rec.work.z += 1;
                    Ok(IterateCache::from_parts(problem, cache.t_gamma(), xb, axb, gamma))
                }
                None => evaluate(problem, cache.t_gamma(), gamma, &mut rec.work),
            },
        };
        let next = match next {
            Ok(n) => n,
            Err(e) => return Ok(abort(rec, &cache, e)),
        };

        if backtracking {
            if let Some(t) = &tilde {
                if sufficient_decrease_violated(problem, &t.x, &next.x, &next.y, &t.r, gamma, config.alpha) {
                    match gamma_backtrack(gamma, directions) {
                        Ok(g) => cache = regamma(problem, &cache, g, &mut rec.work),
                        Err(e) => return Ok(abort(rec, &cache, e)),
                    }
                    continue;
                }
            }
        }

        if let Some(t) = &tilde {
            if tau > 0.0 && d.iter().any(|v| *v != 0.0) {
                // q = R(ỹ) − R(y) = (Ax − z) − (Ax̃ − z̃)
                directions.push_pair(SecantPair::new(&t.y - &cache.y, &cache.r - &t.r));
            }
        }
        if let Some(obs) = observer.as_mut() {
            obs(&StepEvent {
                k,
                current: &cache,
                tilde: tilde.as_ref(),
                y_next: &next.y,
                next: &next,
                tau,
                fallback: tilde.is_none(),
            });
        }
        rec.push(&cache, tau, ls.backtracks);
        cache = next;
        k += 1;
    }
}

/// AMA: `y^{k+1} = y^k + γ(Ax^k − z^k)`.
pub fn ama(problem: &Problem, config: &SolverConfig, y0: &DVector<f64>) -> Result<Solution> {
    ama_with(problem, config, y0, None)
}

pub fn ama_with(
    problem: &Problem,
    config: &SolverConfig,
    y0: &DVector<f64>,
    mut observer: Option<Observer<'_>>,
) -> Result<Solution> {
    let mut rec = Recorder::new(config.record_time);
    let (mut cache, backtracking) = initial(problem, config, y0, &mut rec)?;
    let mut no_memory = crate::directions::ZeroDirection;
    let mut k = 0;
    loop {
        if cache.residual_inf() <= config.tol {
            rec.push(&cache, 0.0, 0);
            return Ok(rec.finish(&cache, SolveStatus::Converged, None));
        }
        if k >= config.max_iter {
            return Ok(rec.finish(&cache, SolveStatus::MaxIter, None));
        }
        let y_next = cache.t_gamma();
        let next = match evaluate(problem, y_next, cache.gamma, &mut rec.work) {
            Ok(n) => n,
            Err(e) => return Ok(abort(rec, &cache, e)),
        };
        if backtracking
            && (!cache.ame.is_finite()
                || sufficient_decrease_violated(problem, &cache.x, &next.x, &next.y, &cache.r, cache.gamma, config.alpha))
        {
            match gamma_backtrack(cache.gamma, &mut no_memory) {
                Ok(g) => cache = regamma(problem, &cache, g, &mut rec.work),
                Err(e) => return Ok(abort(rec, &cache, e)),
            }
            continue;
        }
        if let Some(obs) = observer.as_mut() {
            obs(&StepEvent {
                k,
                current: &cache,
                tilde: None,
                y_next: &next.y,
                next: &next,
                tau: 1.0,
                fallback: false,
            });
        }
        rec.push(&cache, 1.0, 0);
        cache = next;
        k += 1;
    }
}

/// Fast AMA: AMA steps taken from the extrapolated point
/// `w^k = y^k + ((t_{k−1} − 1)/t_k)(y^k − y^{k−1})`.
pub fn fast_ama(problem: &Problem, config: &SolverConfig, y0: &DVector<f64>) -> Result<Solution> {
    fast_ama_with(problem, config, y0, None)
}

pub fn fast_ama_with(
    problem: &Problem,
    config: &SolverConfig,
    y0: &DVector<f64>,
    mut observer: Option<Observer<'_>>,
) -> Result<Solution> {
    let mut rec = Recorder::new(config.record_time);
    let (mut cache, backtracking) = initial(problem, config, y0, &mut rec)?;
    let mut no_memory = crate::directions::ZeroDirection;
    let mut y_prev = y0.clone();
    let mut t: f64 = 1.0;
    let mut k = 0;
    loop {
        if cache.residual_inf() <= config.tol {
            rec.push(&cache, 0.0, 0);
            return Ok(rec.finish(&cache, SolveStatus::Converged, None));
        }
        if k >= config.max_iter {
            return Ok(rec.finish(&cache, SolveStatus::MaxIter, None));
        }
        let gamma = cache.gamma;
        let y_next = cache.t_gamma();
        if backtracking {
            let xb = match problem.x_step(&y_next) {
                Ok(x) => x,
                Err(e) => return Ok(abort(rec, &cache, e)),
            };
            rec.work.x += 1;
            if !cache.ame.is_finite()
                || sufficient_decrease_violated(problem, &cache.x, &xb, &y_next, &cache.r, gamma, config.alpha)
            {
                match gamma_backtrack(gamma, &mut no_memory) {
                    Ok(g) => cache = regamma(problem, &cache, g, &mut rec.work),
                    Err(e) => return Ok(abort(rec, &cache, e)),
                }
                continue;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let w = &y_next + (&y_next - &y_prev) * ((t - 1.0) / t_next);
        let next = match evaluate(problem, w, gamma, &mut rec.work) {
            Ok(n) => n,
            Err(e) => return Ok(abort(rec, &cache, e)),
        };
        if let Some(obs) = observer.as_mut() {
            obs(&StepEvent {
                k,
                current: &cache,
                tilde: None,
                y_next: &y_next,
                next: &next,
                tau: 1.0,
                fallback: false,
            });
        }
        rec.push(&cache, 1.0, 0);
        y_prev = y_next;
        t = t_next;
        cache = next;
        k += 1;
    }
}

/// Dispatches to the selected method.
pub fn solve(problem: &Problem, method: Method, config: &SolverConfig, y0: &DVector<f64>) -> Result<Solution> {
    match method {
        Method::Ama => ama(problem, config, y0),
        Method::FastAma => fast_ama(problem, config, y0),
        Method::Nama => nama(problem, config, y0),
    }
}
