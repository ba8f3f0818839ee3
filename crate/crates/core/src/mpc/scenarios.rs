use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MpcSpec, Stage, StageConstraint, TerminalStage};
use crate::error::{Error, Result};
use crate::functions::Penalty;

pub const AFTI16_TS: f64 = 0.05;
pub const AFTI16_HORIZON: usize = 50;
/// Four seconds of closed loop.
pub const AFTI16_STEPS: usize = 80;
/// Reference switches back to zero after two seconds.
const AFTI16_SWITCH_STEP: usize = 40;
const AFTI16_INPUT_LIMIT: f64 = 25.0;
const AFTI16_SOFT_WEIGHT: f64 = 1e6;
pub const MASSES_TS: f64 = 0.5;
const MASSES_STATE_LIMIT: f64 = 4.0;
const MASSES_INPUT_LIMIT: f64 = 0.5;

/// Exact zero-order hold: `exp([[A, B], [0, 0]]·Ts) = [[Φ, Γ], [0, I]]`.
pub fn discretize_zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nx, nu) = (a.nrows(), b.ncols());
    let mut m = DMatrix::zeros(nx + nu, nx + nu);
    m.view_mut((0, 0), (nx, nx)).copy_from(&(a * ts));
    m.view_mut((0, nx), (nx, nu)).copy_from(&(b * ts));
    let e = m.exp();
    (e.view((0, 0), (nx, nx)).into_owned(), e.view((0, nx), (nx, nu)).into_owned())
}

/// Solves the discrete algebraic Riccati equation by fixed-point iteration.
pub fn dare(phi: &DMatrix<f64>, gamma: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    for _ in 0..200_000 {
        let pg = &p * gamma;
        let s = r + gamma.transpose() * &pg;
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Spec("DARE: R + ΓᵀPΓ not positive definite".into()))?;
        let k = chol.solve(&(pg.transpose() * phi));
        let next = q + phi.transpose() * (&p * phi - &pg * k);
        let next = 0.5 * (&next + next.transpose());
        let change = (&next - &p).amax();
        p = next;
        if change <= 1e-13 * p.amax().max(1.0) {
            return Ok(p);
        }
    }
    Err(Error::Spec("DARE iteration did not converge".into()))
}

fn selector(rows: &[usize], cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), cols);
    for (i, &j) in rows.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

/// Continuous-time AFTI-16 linearized longitudinal model.
fn afti16_continuous() -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            -0.0151, -60.5651, 0.0, -32.174, //
            -0.0001, -1.3411, 0.9929, 0.0, //
            0.00018, 43.2541, -0.86939, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    let b = DMatrix::from_row_slice(
        4,
        2,
        &[-2.516, -13.136, -0.1689, -0.2514, -17.251, -1.5766, 0.0, 0.0],
    );
    (a, b)
}

/// AFTI-16 MPC problem for horizon `n`, initial state `x_init` and state reference `x_ref`.
///
/// Inputs are hard-limited to ±25; the attack angle (±0.5) and pitch
/// (±100) are soft boxes with weight 1e6. The first stage carries only the
/// input box since `x_0` is fixed.
pub fn afti16_spec(n: usize, x_init: DVector<f64>, x_ref: DVector<f64>) -> Result<MpcSpec> {
    let (ac, bc) = afti16_continuous();
    let (phi, gamma) = discretize_zoh(&ac, &bc, AFTI16_TS);
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&[1e-4, 1e2, 1e-3, 1e2]));
    let r = DMatrix::from_diagonal(&DVector::from_column_slice(&[1e-2, 1e-2]));
    let soft_rows = [1, 3];
    let soft_limit = DVector::from_column_slice(&[0.5, 100.0]);
    let soft = |cols: usize| {
        StageConstraint::new(
            selector(&soft_rows, cols),
            Penalty::soft_box(-&soft_limit, soft_limit.clone(), DVector::from_element(2, AFTI16_SOFT_WEIGHT)).unwrap(),
        )
        .unwrap()
    };
    let inputs = StageConstraint::new(
        selector(&[4, 5], 6),
        Penalty::boxed(
            DVector::from_element(2, -AFTI16_INPUT_LIMIT),
            DVector::from_element(2, AFTI16_INPUT_LIMIT),
        )?,
    )?;
    let stages = (0..n)
        .map(|i| Stage {
            phi: phi.clone(),
            gamma: gamma.clone(),
            c: DVector::zeros(4),
            q: q.clone(),
            r: r.clone(),
            x_ref: x_ref.clone(),
            u_ref: DVector::zeros(2),
            constraints: if i == 0 {
                vec![inputs.clone()]
            } else {
                vec![soft(6), inputs.clone()]
            },
        })
        .collect();
    let spec = MpcSpec {
        nx: 4,
        nu: 2,
        stages,
        terminal: TerminalStage {
            q: &q * 100.0,
            x_ref,
            constraints: vec![soft(4)],
        },
        x_init,
    };
    spec.validate()?;
    Ok(spec)
}

/// The AFTI-16 closed-loop benchmark: pitch reference 10 for two seconds, then 0.
#[derive(Debug, Clone)]
pub struct Afti16Scenario {
    /// Spec with zero initial state and zero reference.
    pub base: MpcSpec,
    /// State reference used at each closed-loop step.
    pub references: Vec<DVector<f64>>,
    pub x0: DVector<f64>,
}

impl Afti16Scenario {
    pub fn steps(&self) -> usize {
        self.references.len()
    }

    pub fn spec_at(&self, step: usize, x: &DVector<f64>) -> MpcSpec {
        self.base
            .with_initial_state(x.clone())
            .with_state_reference(&self.references[step])
    }
}

pub fn afti16_scenario() -> Result<Afti16Scenario> {
    afti16_scenario_with_horizon(AFTI16_HORIZON)
}

pub fn afti16_scenario_with_horizon(n: usize) -> Result<Afti16Scenario> {
    let base = afti16_spec(n, DVector::zeros(4), DVector::zeros(4))?;
    let up = DVector::from_column_slice(&[0.0, 0.0, 0.0, 10.0]);
    let references = (0..AFTI16_STEPS)
        .map(|k| if k < AFTI16_SWITCH_STEP { up.clone() } else { DVector::zeros(4) })
        .collect();
    Ok(Afti16Scenario {
        base,
        references,
        x0: DVector::zeros(4),
    })
}

/// Continuous model of `2K` unit masses between two walls, unit springs, no damping.
/// Actuator `a` pushes mass `2a` forward and mass `2a+1` back.
fn masses_continuous(k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = 2 * k;
    let mut stiff = DMatrix::zeros(m, m);
    for i in 0..m {
        stiff[(i, i)] = 2.0;
        if i + 1 < m {
            stiff[(i, i + 1)] = -1.0;
            stiff[(i + 1, i)] = -1.0;
        }
    }
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    a.view_mut((0, m), (m, m)).fill_with_identity();
    a.view_mut((m, 0), (m, m)).copy_from(&(-stiff));
    let mut b = DMatrix::zeros(2 * m, k);
    for act in 0..k {
        b[(m + 2 * act, act)] = 1.0;
        b[(m + 2 * act + 1, act)] = -1.0;
    }
    (a, b)
}

/// Oscillating-masses MPC problem with `K ≥ 2` actuators (`n_x = 4K`, `n_u = K`) and horizon `n`.
///
/// Hard boxes ±4 on states and ±0.5 on inputs, `Q = Q_N = I`, `R = I`, and a
/// terminal ellipsoid `½xᵀPx ≤ δ` with `P` from the DARE. `δ` is the largest
/// level at which the ellipsoid fits the state box and the LQR input stays
/// within its box.
pub fn oscillating_masses(k: usize, n: usize) -> Result<MpcSpec> {
    if k < 2 {
        // with two masses the common mode is not actuated and the DARE has no solution
        return Err(Error::Spec(format!("oscillating masses need K >= 2 (got {k})")));
    }
    let (ac, bc) = masses_continuous(k);
    let (phi, gamma) = discretize_zoh(&ac, &bc, MASSES_TS);
    let (nx, nu) = (4 * k, k);
    let q = DMatrix::identity(nx, nx);
    let r = DMatrix::identity(nu, nu);
    let p = dare(&phi, &gamma, &q, &r)?;
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Spec("DARE solution not positive definite".into()))?
        .inverse();
    let gain = (&r + gamma.transpose() * &p * &gamma)
        .cholesky()
        .unwrap()
        .solve(&(gamma.transpose() * &p * &phi));
    let mut delta = f64::INFINITY;
    for j in 0..nx {
        delta = delta.min(MASSES_STATE_LIMIT.powi(2) / (2.0 * p_inv[(j, j)]));
    }
    for j in 0..nu {
        let row = gain.row(j);
        let spread = (row * &p_inv * row.transpose())[(0, 0)];
        delta = delta.min(MASSES_INPUT_LIMIT.powi(2) / (2.0 * spread));
    }
    let limits = DVector::from_iterator(
        nx + nu,
        (0..nx + nu).map(|i| if i < nx { MASSES_STATE_LIMIT } else { MASSES_INPUT_LIMIT }),
    );
    let full = StageConstraint::new(DMatrix::identity(nx + nu, nx + nu), Penalty::boxed(-&limits, limits.clone())?)?;
    let input_only = StageConstraint::new(
        selector(&(nx..nx + nu).collect::<Vec<_>>(), nx + nu),
        Penalty::boxed(
            DVector::from_element(nu, -MASSES_INPUT_LIMIT),
            DVector::from_element(nu, MASSES_INPUT_LIMIT),
        )?,
    )?;
    let stages = (0..n)
        .map(|i| Stage {
            phi: phi.clone(),
            gamma: gamma.clone(),
            c: DVector::zeros(nx),
            q: q.clone(),
            r: r.clone(),
            x_ref: DVector::zeros(nx),
            u_ref: DVector::zeros(nu),
            constraints: vec![if i == 0 { input_only.clone() } else { full.clone() }],
        })
        .collect();
    let spec = MpcSpec {
        nx,
        nu,
        stages,
        terminal: TerminalStage {
            q,
            x_ref: DVector::zeros(nx),
            constraints: vec![StageConstraint::ellipsoid(&p, delta)?],
        },
        x_init: DVector::zeros(nx),
    };
    spec.validate()?;
    Ok(spec)
}

/// Seeded initial states from which a feasible trajectory exists.
///
/// Each sample starts at a random point of the terminal ellipsoid and runs
/// the (invertible) dynamics backwards under random admissible inputs; the
/// trajectory is kept when every state stays in the box, and its start is
/// returned. Reversing it gives a feasible plan from that start.
pub fn masses_initial_states(spec: &MpcSpec, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let n = spec.horizon();
    if n == 0 {
        return Err(Error::Spec("sampling needs a positive horizon".into()));
    }
    let term = spec
        .terminal
        .constraints
        .iter()
        .find_map(|c| match c.penalty {
            Penalty::Ball { radius, .. } => Some((c.map.clone(), radius)),
            _ => None,
        })
        .ok_or_else(|| Error::Spec("sampler needs a terminal ellipsoid".into()))?;
    let (l, radius) = term;
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Spec("terminal factor is singular".into()))?;
    let (nx, nu) = (spec.nx, spec.nu);
    let st = &spec.stages[0];
    let phi_inv = st
        .phi
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Spec("dynamics are not invertible".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::Spec("initial-state sampler exhausted its attempt budget".into()));
        }
        let dir = DVector::from_fn(nx, |_, _| rng.random_range(-1.0..1.0));
        let scale: f64 = radius * rng.random_range(0.0f64..1.0).powf(1.0 / nx as f64) / dir.norm();
        let mut x = &l_inv * (dir * scale);
        let mut ok = true;
        for _ in 0..n {
            let u = DVector::from_fn(nu, |_, _| {
                if rng.random_bool(0.5) {
                    MASSES_INPUT_LIMIT
                } else {
                    -MASSES_INPUT_LIMIT
                }
            });
            x = &phi_inv * (x - &st.gamma * u - &st.c);
            if x.amax() > MASSES_STATE_LIMIT {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(x);
        }
    }
    Ok(out)
}
