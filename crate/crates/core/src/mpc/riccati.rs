use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::MpcSpec;
use crate::error::{check_dim, Error, Result};

/// Backward Riccati recursion for the feedback law `u_i = K_i x_i + k_i`.
///
/// Depends only on dynamics and cost matrices, so it is reused across
/// x-steps, references and initial states.
#[derive(Debug, Clone)]
pub struct RiccatiFactor {
    /// Cost-to-go Hessians `P_0..P_N`.
    pub p: Vec<DMatrix<f64>>,
    /// Feedback gains `K_0..K_{N-1}`.
    pub k: Vec<DMatrix<f64>>,
    s_chol: Vec<Cholesky<f64, Dyn>>,
}

impl RiccatiFactor {
    pub fn horizon(&self) -> usize {
        self.k.len()
    }
}

pub fn riccati_factor(spec: &MpcSpec) -> Result<RiccatiFactor> {
    let n = spec.horizon();
    let mut p = vec![DMatrix::zeros(0, 0); n + 1];
    let mut k = vec![DMatrix::zeros(0, 0); n];
    let mut s_chol = Vec::with_capacity(n);
    p[n] = spec.terminal.q.clone();
    for i in (0..n).rev() {
        let st = &spec.stages[i];
        let pg = &p[i + 1] * &st.gamma;
        let s = &st.r + st.gamma.transpose() * &pg;
        let s = 0.5 * (&s + s.transpose());
        let chol = Cholesky::new(s)
            .ok_or_else(|| Error::Spec(format!("stage {i}: R + ΓᵀPΓ is not positive definite")))?;
        let gain = -chol.solve(&(pg.transpose() * &st.phi));
        let pp = &st.q + st.phi.transpose() * (&p[i + 1] * &st.phi + &pg * &gain);
        p[i] = 0.5 * (&pp + pp.transpose());
        k[i] = gain;
        s_chol.push(chol);
    }
    s_chol.reverse();
    Ok(RiccatiFactor { p, k, s_chol })
}

/// Minimizes `Σ q_i + q_N + ⟨v, x̄⟩` over dynamically feasible trajectories
/// starting at `spec.x_init`; `v` lives in trajectory space.
pub fn riccati_solve(factor: &RiccatiFactor, spec: &MpcSpec, v: &DVector<f64>) -> Result<DVector<f64>> {
    let n = spec.horizon();
    check_dim("riccati linear term", spec.trajectory_dim(), v.len())?;
    if factor.horizon() != n {
        return Err(Error::Spec(format!(
            "factor horizon {} does not match spec horizon {n}",
            factor.horizon()
        )));
    }
    let (nx, nu) = (spec.nx, spec.nu);
    let t = &spec.terminal;
    let mut s = v.rows(spec.state_offset(n), nx) - &t.q * &t.x_ref;
    let mut ff = vec![DVector::zeros(nu); n];
    for i in (0..n).rev() {
        let st = &spec.stages[i];
        let qx = v.rows(spec.state_offset(i), nx) - &st.q * &st.x_ref;
        let ru = v.rows(spec.input_offset(i), nu) - &st.r * &st.u_ref;
        let h = &factor.p[i + 1] * &st.c + &s;
        let kk = -factor.s_chol[i].solve(&(ru + st.gamma.transpose() * &h));
        s = qx + st.phi.transpose() * (h + &factor.p[i + 1] * (&st.gamma * &kk));
        ff[i] = kk;
    }
    let mut traj = DVector::zeros(spec.trajectory_dim());
    let mut x = spec.x_init.clone();
    for (i, (st, ffi)) in spec.stages.iter().zip(&ff).enumerate() {
        let u = &factor.k[i] * &x + ffi;
        traj.rows_mut(spec.state_offset(i), nx).copy_from(&x);
        traj.rows_mut(spec.input_offset(i), nu).copy_from(&u);
        x = &st.phi * &x + &st.gamma * &u + &st.c;
    }
    traj.rows_mut(spec.state_offset(n), nx).copy_from(&x);
    if traj.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("Riccati solve".into()));
    }
    Ok(traj)
}
