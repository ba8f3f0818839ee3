use std::sync::Arc;

use nalgebra::DVector;

use super::{build_problem_with_factor, riccati_factor, MpcSpec};
use crate::error::{Error, Result};
use crate::operator::{jacobi_scaling, DiagonalScaling};
use crate::solver::{solve, Method, SolveStatus, SolveTrace, SolverConfig};

#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    pub method: Method,
    pub solver: SolverConfig,
    pub jacobi: bool,
    pub warm_start: bool,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            method: Method::Nama,
            solver: SolverConfig::default(),
            jacobi: true,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub iterations: usize,
    pub x_updates: usize,
    pub z_updates: usize,
    pub time_ms: f64,
    pub status: SolveStatus,
    pub residual_inf: f64,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopResult {
    pub stats: Vec<StepStats>,
    pub traces: Vec<SolveTrace>,
    /// Plant states `x_0..x_T`.
    pub states: Vec<DVector<f64>>,
    /// Applied inputs `u_0..u_{T-1}`.
    pub inputs: Vec<DVector<f64>>,
    /// Predicted trajectory of each step, in the unscaled variables.
    pub plans: Vec<DVector<f64>>,
}

impl ClosedLoopResult {
    pub fn avg_iterations(&self) -> f64 {
        self.stats.iter().map(|s| s.iterations as f64).sum::<f64>() / self.stats.len().max(1) as f64
    }

    pub fn max_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.iterations).max().unwrap_or(0)
    }
}

/// Shifts an (unscaled) dual vector one stage forward: block `i` takes the
/// old block `i+1` when their row counts agree and zeros otherwise; the
/// terminal block is kept.
pub fn shift_dual(spec: &MpcSpec, y: &DVector<f64>) -> DVector<f64> {
    let rows = spec.stage_rows();
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    let mut acc = 0;
    for r in &rows {
        offsets.push(acc);
        acc += r;
    }
    let mut out = DVector::zeros(y.len());
    let n = spec.horizon();
    for i in 0..n {
        if i + 1 < n && rows[i] == rows[i + 1] {
            out.rows_mut(offsets[i], rows[i])
                .copy_from(&y.rows(offsets[i + 1], rows[i + 1]));
        }
    }
    out.rows_mut(offsets[n], rows[n]).copy_from(&y.rows(offsets[n], rows[n]));
    out
}

/// Simulates the nominal plant under receding-horizon control.
///
/// `spec_at(k, x)` gives the MPC problem at step `k` from state `x`; every
/// step must share dynamics, costs and constraint maps with step 0 so the
/// Riccati factor, Jacobi weights and stepsize are computed once.
pub fn run_closed_loop<F>(
    steps: usize,
    x0: &DVector<f64>,
    spec_at: F,
    config: &ClosedLoopConfig,
) -> Result<ClosedLoopResult>
where
    F: Fn(usize, &DVector<f64>) -> MpcSpec,
{
    let first = spec_at(0, x0);
    first.validate()?;
    let factor = Arc::new(riccati_factor(&first)?);
    let base = build_problem_with_factor(&first, Arc::clone(&factor))?;
    let scaling: Option<DiagonalScaling> = if config.jacobi {
        Some(jacobi_scaling(&base)?)
    } else {
        None
    };
    let base = match &scaling {
        Some(s) => base.with_scaling(s.clone())?,
        None => base,
    };
    let lipschitz = base.dual_lipschitz();

    let mut x = x0.clone();
    let mut states = vec![x.clone()];
    let mut result = ClosedLoopResult {
        stats: Vec::with_capacity(steps),
        traces: Vec::with_capacity(steps),
        states: Vec::new(),
        inputs: Vec::with_capacity(steps),
        plans: Vec::with_capacity(steps),
    };
    let mut prev_dual: Option<DVector<f64>> = None;
    for k in 0..steps {
        let spec = spec_at(k, &x);
        if spec.horizon() == 0 {
            return Err(Error::Spec("closed loop needs a positive horizon".into()));
        }
        let mut problem = build_problem_with_factor(&spec, Arc::clone(&factor))?;
        if let Some(s) = &scaling {
            problem = problem.with_scaling(s.clone())?;
        }
        if let Some(l) = lipschitz {
            problem.set_dual_lipschitz(l);
        }
        let y0 = match (&prev_dual, config.warm_start) {
            (Some(y), true) => problem.scale_dual(&shift_dual(&spec, y)),
            _ => DVector::zeros(problem.dual_dim()),
        };
        let sol = solve(&problem, config.method, &config.solver, &y0)?;
        let u = sol.x.rows(spec.input_offset(0), spec.nu).into_owned();
        let st = &spec.stages[0];
        x = &st.phi * &x + &st.gamma * &u + &st.c;
        result.stats.push(StepStats {
            step: k,
            iterations: sol.iterations(),
            x_updates: sol.trace.x_updates(),
            z_updates: sol.trace.z_updates(),
            time_ms: sol.trace.time_ms(),
            status: sol.status,
            residual_inf: sol.residual_inf,
        });
        prev_dual = Some(problem.unscale_dual(&sol.y));
        result.plans.push(sol.x);
        result.traces.push(sol.trace);
        result.inputs.push(u);
        states.push(x.clone());
    }
    result.states = states;
    Ok(result)
}
