//! Deterministic fixtures shared by the criterion benches.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nama_core::mpc::{afti16_scenario, build_problem, masses_initial_states, oscillating_masses};
use nama_core::{LinearMap, Penalty, Problem, QuadraticOracle, SolverConfig};

/// Box-constrained QP with `n` variables and `m` constraint rows; the data are
/// smooth functions of the indices, so no RNG is involved.
pub fn box_qp(n: usize, m: usize) -> Problem {
    let h = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 4.0 + (i % 3) as f64,
        1 => -1.0,
        _ => 0.0,
    });
    let q = DVector::from_fn(n, |i, _| ((i * 7 + 3) as f64).sin() * 3.0);
    let a = DMatrix::from_fn(m, n, |i, j| ((i * n + j) as f64 * 0.37).cos());
    let g = Penalty::boxed(DVector::from_element(m, -0.5), DVector::from_element(m, 0.5)).unwrap();
    let f = QuadraticOracle::new(h, q).unwrap();
    Problem::new(Arc::new(f), g, LinearMap::Dense(a)).unwrap()
}

/// Oscillating masses with `k` actuators and horizon `n`, from the first seeded initial state.
pub fn masses(k: usize, n: usize) -> Problem {
    let spec = oscillating_masses(k, n).unwrap();
    let x0 = masses_initial_states(&spec, 1, 0).unwrap().remove(0);
    build_problem(&spec.with_initial_state(x0)).unwrap()
}

/// First closed-loop step of the AFTI-16 benchmark, Jacobi scaled.
pub fn afti16_first_step() -> Problem {
    let sc = afti16_scenario().unwrap();
    let spec = sc.spec_at(0, &sc.x0);
    build_problem(&spec).unwrap().jacobi_scaled().unwrap()
}

pub fn config() -> SolverConfig {
    SolverConfig {
        record_time: false,
        max_iter: 20_000,
        ..SolverConfig::default()
    }
}
