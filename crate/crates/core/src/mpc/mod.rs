//! Linear MPC front end.
//!
//! The decision vector is the trajectory `(x_0, u_0, x_1, u_1, …, x_N)`; the
//! dynamics and `x_0 = x_init` are folded into `f`, so the x-step is an
//! unconstrained LQR problem solved by a Riccati sweep.

mod closed_loop;
mod riccati;
mod scenarios;

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::{Penalty, SmoothOracle};
use crate::operator::LinearMap;
use crate::problem::Problem;

pub use closed_loop::{
    run_closed_loop, shift_dual, ClosedLoopConfig, ClosedLoopResult, StepStats,
};
pub use riccati::{riccati_factor, riccati_solve, RiccatiFactor};
pub use scenarios::{
    afti16_scenario, afti16_scenario_with_horizon, afti16_spec, dare, discretize_zoh, masses_initial_states, oscillating_masses,
    Afti16Scenario, AFTI16_HORIZON, AFTI16_STEPS, AFTI16_TS, MASSES_TS,
};

/// Constraint `g(L·w)` on a stage vector `w` (`(x_i, u_i)`, or `x_N` at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct StageConstraint {
    pub map: DMatrix<f64>,
    pub penalty: Penalty,
}

impl StageConstraint {
    pub fn new(map: DMatrix<f64>, penalty: Penalty) -> Result<Self> {
        if map.nrows() != penalty.dim() {
            return Err(Error::Spec(format!(
                "constraint map has {} rows but penalty has dimension {}",
                map.nrows(),
                penalty.dim()
            )));
        }
        Ok(Self { map, penalty })
    }

    /// `½ xᵀPx ≤ δ` as `‖Lx‖ ≤ √(2δ)` with `LᵀL = P` (upper Cholesky factor).
    pub fn ellipsoid(p: &DMatrix<f64>, delta: f64) -> Result<Self> {
        let chol = Cholesky::new(p.clone())
            .ok_or_else(|| Error::Spec("terminal matrix P is not positive definite".into()))?;
        let upper = chol.l().transpose();
        let n = p.nrows();
        Self::new(upper, Penalty::ball((2.0 * delta).sqrt(), n)?)
    }
}

/// One stage `i < N`: dynamics `x_{i+1} = Φx + Γu + c`, cost
/// `½‖x − x_ref‖²_Q + ½‖u − u_ref‖²_R`, and constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub c: DVector<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x_ref: DVector<f64>,
    pub u_ref: DVector<f64>,
    pub constraints: Vec<StageConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalStage {
    pub q: DMatrix<f64>,
    pub x_ref: DVector<f64>,
    pub constraints: Vec<StageConstraint>,
}

/// Finite-horizon linear MPC problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSpec {
    pub nx: usize,
    pub nu: usize,
    pub stages: Vec<Stage>,
    pub terminal: TerminalStage,
    pub x_init: DVector<f64>,
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        f64::INFINITY
    } else {
        m.clone().symmetric_eigenvalues().min()
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-10 * m.amax().max(1.0)
}

impl MpcSpec {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Length of the trajectory vector.
    pub fn trajectory_dim(&self) -> usize {
        self.horizon() * (self.nx + self.nu) + self.nx
    }

    /// Offset of `x_i` in the trajectory vector.
    pub fn state_offset(&self, i: usize) -> usize {
        i * (self.nx + self.nu)
    }

    pub fn input_offset(&self, i: usize) -> usize {
        i * (self.nx + self.nu) + self.nx
    }

    /// Constraint rows per stage (terminal last).
    pub fn stage_rows(&self) -> Vec<usize> {
        let rows = |cs: &[StageConstraint]| cs.iter().map(|c| c.map.nrows()).sum::<usize>();
        self.stages
            .iter()
            .map(|s| rows(&s.constraints))
            .chain(std::iter::once(rows(&self.terminal.constraints)))
            .collect()
    }

    pub fn dual_dim(&self) -> usize {
        self.stage_rows().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu) = (self.nx, self.nu);
        let dim = |what: &str, i: usize, r: usize, c: usize, m: &DMatrix<f64>| -> Result<()> {
            if m.shape() != (r, c) {
                return Err(Error::Spec(format!(
                    "stage {i}: {what} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(())
        };
        if self.x_init.len() != nx {
            return Err(Error::Spec(format!("x_init has length {}, expected {nx}", self.x_init.len())));
        }
        for (i, s) in self.stages.iter().enumerate() {
            dim("Phi", i, nx, nx, &s.phi)?;
            dim("Gamma", i, nx, nu, &s.gamma)?;
            dim("Q", i, nx, nx, &s.q)?;
            dim("R", i, nu, nu, &s.r)?;
            if s.c.len() != nx || s.x_ref.len() != nx || s.u_ref.len() != nu {
                return Err(Error::Spec(format!("stage {i}: vector lengths inconsistent")));
            }
            if !is_symmetric(&s.q) || min_eig(&s.q) < -1e-12 {
                return Err(Error::Spec(format!("stage {i}: Q must be symmetric PSD")));
            }
            if !is_symmetric(&s.r) || Cholesky::new(s.r.clone()).is_none() {
                return Err(Error::Spec(format!("stage {i}: R must be symmetric positive definite")));
            }
            for c in &s.constraints {
                if c.map.ncols() != nx + nu {
                    return Err(Error::Spec(format!(
                        "stage {i}: constraint map has {} columns, expected {}",
                        c.map.ncols(),
                        nx + nu
                    )));
                }
            }
        }
        let t = &self.terminal;
        dim("Q_N", self.horizon(), nx, nx, &t.q)?;
        if t.x_ref.len() != nx {
            return Err(Error::Spec("terminal reference has wrong length".into()));
        }
        if !is_symmetric(&t.q) || min_eig(&t.q) < -1e-12 {
            return Err(Error::Spec("Q_N must be symmetric PSD".into()));
        }
        for c in &t.constraints {
            if c.map.ncols() != nx {
                return Err(Error::Spec("terminal constraint map must act on x_N".into()));
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue of `blkdiag(Q_i, R_i, Q_N)`, if positive.
    pub fn strong_convexity(&self) -> Option<f64> {
        let mut mu = min_eig(&self.terminal.q);
        for s in &self.stages {
            mu = mu.min(min_eig(&s.q)).min(min_eig(&s.r));
        }
        (mu > 0.0 && mu.is_finite()).then_some(mu)
    }

    /// Objective `Σ q_i(x_i, u_i) + q_N(x_N)` on a trajectory.
    pub fn cost(&self, traj: &DVector<f64>) -> f64 {
        let quad = |m: &DMatrix<f64>, v: &DVector<f64>| 0.5 * v.dot(&(m * v));
        let mut total = 0.0;
        for (i, s) in self.stages.iter().enumerate() {
            let x = traj.rows(self.state_offset(i), self.nx) - &s.x_ref;
            let u = traj.rows(self.input_offset(i), self.nu) - &s.u_ref;
            total += quad(&s.q, &x) + quad(&s.r, &u);
        }
        let xn = traj.rows(self.state_offset(self.horizon()), self.nx) - &self.terminal.x_ref;
        total + quad(&self.terminal.q, &xn)
    }

    /// Splits a trajectory into states `x_0..x_N` and inputs `u_0..u_{N-1}`.
    pub fn split(&self, traj: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let n = self.horizon();
        let xs = (0..=n)
            .map(|i| traj.rows(self.state_offset(i), self.nx).into_owned())
            .collect();
        let us = (0..n)
            .map(|i| traj.rows(self.input_offset(i), self.nu).into_owned())
            .collect();
        (xs, us)
    }

    /// `A = diag(L_0, …, L_N)` with each `L_i` the stacked stage constraint maps.
    pub fn constraint_map(&self) -> LinearMap {
        let stack = |cs: &[StageConstraint], cols: usize| {
            let rows: usize = cs.iter().map(|c| c.map.nrows()).sum();
            let mut m = DMatrix::zeros(rows, cols);
            let mut r0 = 0;
            for c in cs {
                m.view_mut((r0, 0), c.map.shape()).copy_from(&c.map);
                r0 += c.map.nrows();
            }
            m
        };
        let mut blocks: Vec<_> = self
            .stages
            .iter()
            .map(|s| stack(&s.constraints, self.nx + self.nu))
            .collect();
        blocks.push(stack(&self.terminal.constraints, self.nx));
        LinearMap::block_diagonal(blocks)
    }

    /// `g = Σ g_i`, laid out in the same order as [`MpcSpec::constraint_map`].
    pub fn penalty(&self) -> Penalty {
        let parts = self
            .stages
            .iter()
            .flat_map(|s| s.constraints.iter())
            .chain(self.terminal.constraints.iter())
            .map(|c| c.penalty.clone())
            .collect();
        Penalty::sum(parts)
    }

    /// Same model with a new initial state.
    pub fn with_initial_state(&self, x_init: DVector<f64>) -> Self {
        Self {
            x_init,
            ..self.clone()
        }
    }

    /// Same model with every stage and terminal state reference replaced.
    pub fn with_state_reference(&self, x_ref: &DVector<f64>) -> Self {
        let mut out = self.clone();
        for s in &mut out.stages {
            s.x_ref = x_ref.clone();
        }
        out.terminal.x_ref = x_ref.clone();
        out
    }
}

/// f-oracle of the MPC problem: the Riccati x-step on the feasible-trajectory subspace.
#[derive(Debug, Clone)]
pub struct MpcOracle {
    spec: Arc<MpcSpec>,
    factor: Arc<RiccatiFactor>,
    mu: Option<f64>,
}

impl MpcOracle {
    pub fn new(spec: Arc<MpcSpec>, factor: Arc<RiccatiFactor>) -> Self {
        let mu = spec.strong_convexity();
        Self { spec, factor, mu }
    }

    pub fn spec(&self) -> &MpcSpec {
        &self.spec
    }

    pub fn factor(&self) -> &Arc<RiccatiFactor> {
        &self.factor
    }
}

impl SmoothOracle for MpcOracle {
    fn dim(&self) -> usize {
        self.spec.trajectory_dim()
    }

    fn minimize_linear(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        riccati_solve(&self.factor, &self.spec, v)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.spec.cost(x)
    }

    fn strong_convexity(&self) -> Option<f64> {
        self.mu
    }

    fn is_affine(&self) -> bool {
        true
    }
}

/// Builds `min f(x̄) + g(Ax̄)` from a spec, factoring once.
pub fn build_problem(spec: &MpcSpec) -> Result<Problem> {
    spec.validate()?;
    let factor = Arc::new(riccati_factor(spec)?);
    build_problem_with_factor(spec, factor)
}

/// As [`build_problem`], reusing a factor computed for the same dynamics and costs.
pub fn build_problem_with_factor(spec: &MpcSpec, factor: Arc<RiccatiFactor>) -> Result<Problem> {
    let oracle = MpcOracle::new(Arc::new(spec.clone()), factor);
    Problem::new(Arc::new(oracle), spec.penalty(), spec.constraint_map())
}
