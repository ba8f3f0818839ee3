//! Solvers for structured convex programs `min f(x) + g(Ax)` with strongly
//! convex `f`: AMA, fast AMA and NAMA (Newton-type alternating minimization
//! with quasi-Newton directions), plus a linear-MPC front end.
//!
//! ```
//! use nalgebra::DVector;
//! use nama_core::mpc::{build_problem, oscillating_masses};
//! use nama_core::solver::nama;
//! use nama_core::SolverConfig;
//!
//! # fn main() -> nama_core::Result<()> {
//! let spec = oscillating_masses(4, 10)?.with_initial_state(DVector::from_element(16, 0.1));
//! let problem = build_problem(&spec)?.jacobi_scaled()?;
//! let sol = nama(&problem, &SolverConfig::default(), &DVector::zeros(problem.dual_dim()))?;
//! assert!(sol.converged());
//! # Ok(())
//! # }
//! ```

// `!(a > b)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod directions;
pub mod envelope;
pub mod error;
pub mod functions;
pub mod mpc;
pub mod operator;
pub mod problem;
pub mod report;
pub mod schema;
pub mod solver;

pub use directions::{DirectionProvider, DirectionState, EngineKind, SecantPair, ZeroDirection};
pub use envelope::IterateCache;
pub use error::{Error, Result};
pub use functions::{Penalty, QuadraticOracle, SmoothOracle};
pub use operator::{DiagonalScaling, LinearMap};
pub use problem::Problem;
pub use schema::ProblemFile;
pub use solver::{GammaPolicy, Method, Solution, SolveStatus, SolveTrace, SolverConfig};
