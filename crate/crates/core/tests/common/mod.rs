#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nama_core::directions::{DirectionProvider, PushOutcome, SecantPair};
use nama_core::mpc::{MpcSpec, Stage, StageConstraint, TerminalStage};
use nama_core::{LinearMap, Penalty, Problem, QuadraticOracle, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rand_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn quiet() -> SolverConfig {
    SolverConfig {
        record_time: false,
        ..SolverConfig::default()
    }
}

/// f = ½x², g = indicator of {z ≤ 0}, A = 1.
pub fn half_line() -> Problem {
    let f = QuadraticOracle::new(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
    let g = Penalty::upper_bound(DVector::zeros(1)).unwrap();
    Problem::new(Arc::new(f), g, LinearMap::identity(1)).unwrap()
}

pub fn v1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

/// `min ½xᵀHx + qᵀx  s.t.  l ≤ Ax ≤ u` with finite bounds around a random feasible point.
#[derive(Debug, Clone)]
pub struct BoxQp {
    pub h: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxQp {
    pub fn random(seed: u64, n: usize, m: usize) -> Self {
        let mut r = rng(seed);
        let mh = rand_matrix(&mut r, n, n);
        let h = mh.transpose() * &mh + DMatrix::identity(n, n) * 0.5;
        let q = rand_vector(&mut r, n) * 3.0;
        let a = rand_matrix(&mut r, m, n);
        let x0 = rand_vector(&mut r, n) * 0.5;
        let ax0 = &a * &x0;
        let lower = DVector::from_fn(m, |i, _| ax0[i] - r.random_range(0.05..0.6));
        let upper = DVector::from_fn(m, |i, _| ax0[i] + r.random_range(0.05..0.6));
        Self { h, q, a, lower, upper }
    }

    pub fn problem(&self) -> Problem {
        let f = QuadraticOracle::new(self.h.clone(), self.q.clone()).unwrap();
        let g = Penalty::boxed(self.lower.clone(), self.upper.clone()).unwrap();
        Problem::new(Arc::new(f), g, LinearMap::Dense(self.a.clone())).unwrap()
    }

    pub fn mu(&self) -> f64 {
        self.h.clone().symmetric_eigenvalues().min()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.q.dot(x)
    }

    /// Exact solution by enumerating active sets of the one-sided
    /// constraints in order of size; returns `(x⋆, y⋆)` with `y⋆` the
    /// multiplier of `Ax` (positive on the upper side).
    ///
    /// With `S` active, `λ = −(A_S H⁻¹ A_Sᵀ)⁻¹(c_S + b_S)` where `c = AH⁻¹q`,
    /// so the Schur block is factored once per subset and reused for every
    /// choice of sides.
    pub fn kkt_oracle(&self) -> (DVector<f64>, DVector<f64>) {
        let (n, m) = (self.h.nrows(), self.a.nrows());
        let chol = self.h.clone().cholesky().expect("H must be positive definite");
        let hinv_at = chol.solve(&self.a.transpose());
        let big_m = &self.a * &hinv_at;
        let x_free = -chol.solve(&self.q);
        let ax_free = &self.a * &x_free;
        let tol = 1e-9;
        let mut found = None;
        for size in 0..=m.min(n) {
            for_each_subset(m, size, &mut |set| {
                if found.is_some() {
                    return;
                }
                let k = set.len();
                let mss = DMatrix::from_fn(k, k, |i, j| big_m[(set[i], set[j])]);
                let Some(lu) = (k > 0).then(|| mss.lu()) else {
                    if let Some(sol) = self.check(&x_free, &ax_free, &DVector::zeros(m), tol) {
                        found = Some(sol);
                    }
                    return;
                };
                if lu.determinant().abs() < 1e-12 {
                    return;
                }
                for pattern in 0..(1u32 << k) {
                    let upper_side = |b: usize| pattern >> b & 1 == 0;
                    let rhs = DVector::from_fn(k, |b, _| {
                        let i = set[b];
                        let bound = if upper_side(b) { self.upper[i] } else { self.lower[i] };
                        bound - ax_free[i]
                    });
                    let Some(mu) = lu.solve(&rhs) else { continue };
                    // Ax = Ax_free + M_{:,S} μ with λ = −μ
                    let ok_sign = (0..k).all(|b| if upper_side(b) { mu[b] <= tol } else { mu[b] >= -tol });
                    if !ok_sign {
                        continue;
                    }
                    let mut y = DVector::zeros(m);
                    for b in 0..k {
                        y[set[b]] = -mu[b];
                    }
                    let x = &x_free - &hinv_at * &y;
                    let ax = &self.a * &x;
                    if let Some(sol) = self.check(&x, &ax, &y, tol) {
                        found = Some(sol);
                        return;
                    }
                }
            });
            if let Some(sol) = found.take() {
                return sol;
            }
        }
        panic!("no KKT point found; problem infeasible?");
    }

    fn check(
        &self,
        x: &DVector<f64>,
        ax: &DVector<f64>,
        y: &DVector<f64>,
        tol: f64,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let scale = 1.0 + ax.amax();
        let feasible = (0..ax.len())
            .all(|i| ax[i] <= self.upper[i] + tol * scale && ax[i] >= self.lower[i] - tol * scale);
        feasible.then(|| (x.clone(), y.clone()))
    }
}

fn for_each_subset(m: usize, size: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, m: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, size, cur, f);
            cur.pop();
        }
    }
    rec(0, m, size, &mut Vec::new(), f);
}

/// Direction source replaying a fixed list, then zeros.
#[derive(Debug, Default)]
pub struct Scripted {
    pub dirs: Vec<DVector<f64>>,
    pub used: usize,
    pub pushes: usize,
}

impl Scripted {
    pub fn new(dirs: Vec<DVector<f64>>) -> Self {
        Self {
            dirs,
            used: 0,
            pushes: 0,
        }
    }
}

impl DirectionProvider for Scripted {
    fn direction(&mut self, r_neg: &DVector<f64>) -> DVector<f64> {
        let d = self
            .dirs
            .get(self.used)
            .cloned()
            .unwrap_or_else(|| DVector::zeros(r_neg.len()));
        self.used += 1;
        d
    }

    fn push_pair(&mut self, _pair: SecantPair) -> PushOutcome {
        self.pushes += 1;
        PushOutcome::Skipped
    }

    fn reset(&mut self) {}

    fn stored_pairs(&self) -> usize {
        0
    }

    fn set_seed_scale(&mut self, _scale: f64) {}
}

/// Random stable-ish MPC instance with box constraints on `(x_i, u_i)` for `i ≥ 1`,
/// inputs at stage 0 and a box on `x_N`.
pub fn random_mpc(seed: u64, nx: usize, nu: usize, n: usize) -> MpcSpec {
    let mut r = rng(seed);
    let phi = {
        let m = rand_matrix(&mut r, nx, nx);
        let rho = m.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        m * (1.1 / rho.max(1e-3))
    };
    let gamma = rand_matrix(&mut r, nx, nu);
    let spd = |r: &mut ChaCha8Rng, k: usize, shift: f64| {
        let m = rand_matrix(r, k, k);
        m.transpose() * m + DMatrix::identity(k, k) * shift
    };
    let stages = (0..n)
        .map(|i| {
            let cols = nx + nu;
            let constraint = if i == 0 {
                let mut map = DMatrix::zeros(nu, cols);
                map.view_mut((0, nx), (nu, nu)).fill_with_identity();
                StageConstraint::new(
                    map,
                    Penalty::boxed(DVector::from_element(nu, -1.0), DVector::from_element(nu, 1.0)).unwrap(),
                )
                .unwrap()
            } else {
                StageConstraint::new(
                    DMatrix::identity(cols, cols),
                    Penalty::boxed(DVector::from_element(cols, -2.0), DVector::from_element(cols, 2.0)).unwrap(),
                )
                .unwrap()
            };
            Stage {
                phi: phi.clone(),
                gamma: gamma.clone(),
                c: rand_vector(&mut r, nx) * 0.1,
                q: spd(&mut r, nx, 0.1),
                r: spd(&mut r, nu, 0.5),
                x_ref: rand_vector(&mut r, nx) * 0.3,
                u_ref: rand_vector(&mut r, nu) * 0.1,
                constraints: vec![constraint],
            }
        })
        .collect();
    MpcSpec {
        nx,
        nu,
        stages,
        terminal: TerminalStage {
            q: spd(&mut r, nx, 0.5),
            x_ref: rand_vector(&mut r, nx) * 0.3,
            constraints: vec![StageConstraint::new(
                DMatrix::identity(nx, nx),
                Penalty::boxed(DVector::from_element(nx, -3.0), DVector::from_element(nx, 3.0)).unwrap(),
            )
            .unwrap()],
        },
        x_init: rand_vector(&mut r, nx) * 0.5,
    }
}

/// Dense equality-constrained solve of the MPC x-step with linear term `v`:
/// `min ½x̄ᵀHx̄ + (h + v)ᵀx̄  s.t.  Ex̄ = e` (dynamics and `x_0 = x_init`).
pub fn mpc_kkt(spec: &MpcSpec, v: &DVector<f64>) -> DVector<f64> {
    let (nx, nu, n) = (spec.nx, spec.nu, spec.horizon());
    let dim = spec.trajectory_dim();
    let mut h = DMatrix::zeros(dim, dim);
    let mut lin = v.clone();
    for (i, s) in spec.stages.iter().enumerate() {
        let (xo, uo) = (spec.state_offset(i), spec.input_offset(i));
        h.view_mut((xo, xo), (nx, nx)).copy_from(&s.q);
        h.view_mut((uo, uo), (nu, nu)).copy_from(&s.r);
        let mut lx = lin.rows_mut(xo, nx);
        lx -= &s.q * &s.x_ref;
        let mut lu = lin.rows_mut(uo, nu);
        lu -= &s.r * &s.u_ref;
    }
    let xo = spec.state_offset(n);
    h.view_mut((xo, xo), (nx, nx)).copy_from(&spec.terminal.q);
    let mut lx = lin.rows_mut(xo, nx);
    lx -= &spec.terminal.q * &spec.terminal.x_ref;
    let neq = nx * (n + 1);
    let mut e = DMatrix::zeros(neq, dim);
    let mut rhs = DVector::zeros(neq);
    e.view_mut((0, 0), (nx, nx)).fill_with_identity();
    rhs.rows_mut(0, nx).copy_from(&spec.x_init);
    for (i, s) in spec.stages.iter().enumerate() {
        let row = nx * (i + 1);
        e.view_mut((row, spec.state_offset(i + 1)), (nx, nx)).fill_with_identity();
        e.view_mut((row, spec.state_offset(i)), (nx, nx)).copy_from(&(-&s.phi));
        e.view_mut((row, spec.input_offset(i)), (nx, nu)).copy_from(&(-&s.gamma));
        rhs.rows_mut(row, nx).copy_from(&s.c);
    }
    let mut kkt = DMatrix::zeros(dim + neq, dim + neq);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(&h);
    kkt.view_mut((0, dim), (dim, neq)).copy_from(&e.transpose());
    kkt.view_mut((dim, 0), (neq, dim)).copy_from(&e);
    let mut b = DVector::zeros(dim + neq);
    b.rows_mut(0, dim).copy_from(&(-lin));
    b.rows_mut(dim, neq).copy_from(&rhs);
    kkt.lu().solve(&b).expect("singular MPC KKT system").rows(0, dim).into_owned()
}

/// Box bounds of a penalty made of boxes only.
pub fn box_bounds(g: &Penalty) -> (DVector<f64>, DVector<f64>) {
    match g {
        Penalty::Box { lower, upper } => (lower.clone(), upper.clone()),
        Penalty::Sum(sum) => {
            let (mut lo, mut up) = (Vec::new(), Vec::new());
            for (_, p) in sum.blocks() {
                let (l, u) = box_bounds(p);
                lo.extend(l.iter().copied());
                up.extend(u.iter().copied());
            }
            (DVector::from_vec(lo), DVector::from_vec(up))
        }
        other => panic!("not a box: {other:?}"),
    }
}

/// Eliminates the dynamics: `x̄ = T·u + t`, giving a QP in the stacked inputs.
pub struct Condensed {
    pub qp: BoxQp,
    pub t_map: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl Condensed {
    pub fn new(spec: &MpcSpec) -> Self {
        let (nu, n) = (spec.nu, spec.horizon());
        let dim = spec.trajectory_dim();
        let simulate = |u: &DVector<f64>, affine: bool| {
            let mut traj = DVector::zeros(dim);
            let mut x = if affine { spec.x_init.clone() } else { DVector::zeros(spec.nx) };
            for (i, s) in spec.stages.iter().enumerate() {
                let ui = u.rows(i * nu, nu).into_owned();
                traj.rows_mut(spec.state_offset(i), spec.nx).copy_from(&x);
                traj.rows_mut(spec.input_offset(i), nu).copy_from(&ui);
                x = &s.phi * &x + &s.gamma * &ui + if affine { s.c.clone() } else { DVector::zeros(spec.nx) };
            }
            traj.rows_mut(spec.state_offset(n), spec.nx).copy_from(&x);
            traj
        };
        let offset = simulate(&DVector::zeros(n * nu), true);
        let mut t_map = DMatrix::zeros(dim, n * nu);
        for j in 0..n * nu {
            let mut e = DVector::zeros(n * nu);
            e[j] = 1.0;
            t_map.set_column(j, &simulate(&e, false));
        }
        // cost ½(Tu + t − r)ᵀH(Tu + t − r)
        let mut h = DMatrix::zeros(dim, dim);
        let mut r = DVector::zeros(dim);
        for (i, s) in spec.stages.iter().enumerate() {
            let (xo, uo) = (spec.state_offset(i), spec.input_offset(i));
            h.view_mut((xo, xo), (spec.nx, spec.nx)).copy_from(&s.q);
            h.view_mut((uo, uo), (nu, nu)).copy_from(&s.r);
            r.rows_mut(xo, spec.nx).copy_from(&s.x_ref);
            r.rows_mut(uo, nu).copy_from(&s.u_ref);
        }
        let xo = spec.state_offset(n);
        h.view_mut((xo, xo), (spec.nx, spec.nx)).copy_from(&spec.terminal.q);
        r.rows_mut(xo, spec.nx).copy_from(&spec.terminal.x_ref);
        let hu = t_map.transpose() * &h * &t_map;
        let qu = t_map.transpose() * (&h * (&offset - &r));
        let a = spec.constraint_map().to_dense();
        let (lo, up) = box_bounds(&spec.penalty());
        let shift = &a * &offset;
        let qp = BoxQp {
            h: 0.5 * (&hu + hu.transpose()),
            q: qu,
            a: &a * &t_map,
            lower: lo - &shift,
            upper: up - shift,
        };
        Self { qp, t_map, offset }
    }

    pub fn solve(&self) -> DVector<f64> {
        let (u, _) = self.qp.kkt_oracle();
        &self.t_map * u + &self.offset
    }
}
