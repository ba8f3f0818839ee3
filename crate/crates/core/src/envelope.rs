//! Alternating-minimization envelope (the dual forward-backward envelope).
//!
//! For a dual point `y` and stepsize `γ`:
//! `x(y) = argmin_x f(x) + ⟨y, Ax⟩`,
//! `z_γ(y) = prox_{γ⁻¹g}(γ⁻¹y + Ax(y))`,
//! `ψ_γ(y) = −ℒ_γ(x(y), z_γ(y), y)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::Problem;

/// One dual point with every quantity derived from it at a fixed `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateCache {
    pub y: DVector<f64>,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub ax: DVector<f64>,
    /// `Ax − z`; note `R_γ(y) = −r`.
    pub r: DVector<f64>,
    pub gamma: f64,
    pub f_val: f64,
    pub g_val: f64,
    pub ame: f64,
}

impl IterateCache {
    /// Builds the cache from `y` and an already computed `x = x(y)`.
    pub fn from_x(problem: &Problem, y: DVector<f64>, x: DVector<f64>, gamma: f64) -> Self {
        let ax = problem.a().apply(&x);
        Self::from_parts(problem, y, x, ax, gamma)
    }

    /// Builds the cache from `y`, `x = x(y)` and `Ax`.
    pub fn from_parts(
        problem: &Problem,
        y: DVector<f64>,
        x: DVector<f64>,
        ax: DVector<f64>,
        gamma: f64,
    ) -> Self {
        let z = problem.g().prox(&(&y / gamma + &ax), 1.0 / gamma);
        let r = &ax - &z;
        let f_val = problem.f().value(&x);
        let g_val = problem.g().value(&z);
        let ame = -lagrangian_value(f_val, g_val, &y, &r, gamma);
        Self {
            y,
            x,
            z,
            ax,
            r,
            gamma,
            f_val,
            g_val,
            ame,
        }
    }

    /// `T_γ(y) = y + γ(Ax − z)`.
    pub fn t_gamma(&self) -> DVector<f64> {
        &self.y + &self.r * self.gamma
    }

    /// `R_γ(y) = z − Ax`.
    pub fn residual(&self) -> DVector<f64> {
        -&self.r
    }

    pub fn residual_inf(&self) -> f64 {
        self.r.amax()
    }
}

fn lagrangian_value(f_val: f64, g_val: f64, y: &DVector<f64>, r: &DVector<f64>, gamma: f64) -> f64 {
    if g_val == f64::INFINITY || f_val == f64::INFINITY {
        return f64::INFINITY;
    }
    f_val + g_val + y.dot(r) + 0.5 * gamma * r.norm_squared()
}

pub fn eval_x(problem: &Problem, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dual vector".into()));
    }
    problem.x_step(y)
}

pub fn eval_z(problem: &Problem, x: &DVector<f64>, y: &DVector<f64>, gamma: f64) -> DVector<f64> {
    problem.g().prox(&(y / gamma + problem.a().apply(x)), 1.0 / gamma)
}

/// `ℒ_γ(x, z, y) = f(x) + g(z) + ⟨y, Ax − z⟩ + (γ/2)‖Ax − z‖²`; `γ = 0` gives
/// the ordinary Lagrangian. Returns `+∞` when `g(z) = +∞`.
pub fn augmented_lagrangian(
    problem: &Problem,
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
    gamma: f64,
) -> f64 {
    let r = problem.a().apply(x) - z;
    lagrangian_value(problem.f().value(x), problem.g().value(z), y, &r, gamma)
}

/// `ψ_γ(y)` together with the cache it was computed from.
pub fn ame(problem: &Problem, y: &DVector<f64>, gamma: f64) -> Result<(f64, IterateCache)> {
    let x = eval_x(problem, y)?;
    let cache = IterateCache::from_x(problem, y.clone(), x, gamma);
    Ok((cache.ame, cache))
}

/// `ψ_γ(y) = f*(−Aᵀy) − (γ/2)‖Ax(y)‖² + (g*)^γ(y + γAx(y))`, an evaluation
/// path independent of the augmented Lagrangian.
pub fn ame_alt(problem: &Problem, y: &DVector<f64>, gamma: f64) -> Result<f64> {
    let g = problem.g();
    let x = eval_x(problem, y)?;
    let ax = problem.a().apply(&x);
    let f_conj = problem.conjugate_f(y, &x);
    let w = y + &ax * gamma;
    // prox_{γg*}(w) by the Moreau identity
    let u = &w - g.prox(&(&w / gamma), 1.0 / gamma) * gamma;
    let g_conj = g
        .conjugate_value(&u)
        .ok_or_else(|| Error::Unsupported("g has no closed-form conjugate".into()))?;
    let moreau = g_conj + (&u - &w).norm_squared() / (2.0 * gamma);
    Ok(f_conj - 0.5 * gamma * ax.norm_squared() + moreau)
}

pub fn t_gamma(cache: &IterateCache) -> DVector<f64> {
    cache.t_gamma()
}

pub fn residual(cache: &IterateCache) -> DVector<f64> {
    cache.residual()
}

/// `∇ψ_γ(y) = Q_γ(y) R_γ(y)` with `Q_γ = I − γA∇²f*Aᵀ`, for quadratic `f`.
pub fn grad_ame(problem: &Problem, cache: &IterateCache) -> Result<DVector<f64>> {
    if !problem.f().is_affine() {
        return Err(Error::Unsupported(
            "gradient diagnostic requires a quadratic f".into(),
        ));
    }
    let m = problem.dual_dim();
    let res = cache.residual();
    let x0 = problem.x_step(&DVector::zeros(m))?;
    let xr = problem.x_step(&res)?;
    // A∇²f*Aᵀ v = −A(x(v) − x(0))
    Ok(&res + problem.a().apply(&(xr - x0)) * cache.gamma)
}
