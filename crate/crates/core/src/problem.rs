//! The structured program `min f(x) + g(Ax)` and its dual.

use std::sync::{Arc, OnceLock};

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::functions::{Penalty, SmoothOracle};
use crate::operator::{jacobi_scaling, operator_norm, power_iteration, DiagonalScaling, LinearMap};

const NORM_TOL: f64 = 1e-9;
const NORM_MAX_ITER: usize = 20_000;

/// Pairing of an f-oracle, a g-prox oracle and a linear map `A`.
#[derive(Debug, Clone)]
pub struct Problem {
    f: Arc<dyn SmoothOracle>,
    g: Penalty,
    a: LinearMap,
    scaling: Option<DiagonalScaling>,
    a_norm: OnceLock<f64>,
    lipschitz: OnceLock<f64>,
}

impl Problem {
    pub fn new(f: Arc<dyn SmoothOracle>, g: Penalty, a: LinearMap) -> Result<Self> {
        check_dim("A columns vs f dimension", f.dim(), a.cols())?;
        check_dim("A rows vs g dimension", g.dim(), a.rows())?;
        Ok(Self {
            f,
            g,
            a,
            scaling: None,
            a_norm: OnceLock::new(),
            lipschitz: OnceLock::new(),
        })
    }

    pub fn f(&self) -> &dyn SmoothOracle {
        self.f.as_ref()
    }

    pub fn f_shared(&self) -> Arc<dyn SmoothOracle> {
        Arc::clone(&self.f)
    }

    pub fn g(&self) -> &Penalty {
        &self.g
    }

    pub fn a(&self) -> &LinearMap {
        &self.a
    }

    pub fn primal_dim(&self) -> usize {
        self.a.cols()
    }

    pub fn dual_dim(&self) -> usize {
        self.a.rows()
    }

    /// Dual scaling applied to this problem, if any (`A` here is `D·A_orig`).
    pub fn scaling(&self) -> Option<&DiagonalScaling> {
        self.scaling.as_ref()
    }

    /// `x(y) = argmin_x { f(x) + ⟨y, Ax⟩ }`.
    pub fn x_step(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("dual vector", self.dual_dim(), y.len())?;
        let x = self.f.minimize_linear(&self.a.apply_adjoint(y))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle("x-step returned non-finite entries".into()));
        }
        Ok(x)
    }

    pub fn mu_f(&self) -> Option<f64> {
        self.f.strong_convexity().filter(|m| *m > 0.0 && m.is_finite())
    }

    /// Spectral norm estimate of `A`, inflated by the estimation tolerance.
    pub fn a_norm(&self) -> f64 {
        *self
            .a_norm
            .get_or_init(|| operator_norm(&self.a, NORM_TOL, NORM_MAX_ITER).upper(NORM_TOL))
    }

    /// Upper estimate of the Lipschitz constant of `y ↦ ∇(f*∘(−Aᵀ))(y)`.
    ///
    /// For an affine x-step this is `λ_max(A ∇²f* Aᵀ)`; otherwise `‖A‖²/μ_f`.
    pub fn dual_lipschitz(&self) -> Option<f64> {
        if let Some(l) = self.lipschitz.get() {
            return Some(*l);
        }
        let value = if self.f.is_affine() {
            let m = self.dual_dim();
            let base = self.x_step(&DVector::zeros(m)).ok()?;
            let est = power_iteration(
                m,
                |v| {
                    let x = self.x_step(v).expect("x-step failed during norm estimation");
                    self.a.apply(&(&base - x))
                },
                NORM_TOL,
                NORM_MAX_ITER,
            );
            let bound = self.mu_f().map(|mu| self.a_norm().powi(2) / mu);
            if est.converged {
                est.upper(1e-6)
            } else {
                bound.unwrap_or(est.value * 1.1)
            }
        } else {
            self.a_norm().powi(2) / self.mu_f()?
        };
        let _ = self.lipschitz.set(value);
        Some(value)
    }

    /// Overrides the dual Lipschitz estimate (e.g. when shared across MPC steps).
    pub fn set_dual_lipschitz(&self, value: f64) {
        let _ = self.lipschitz.set(value);
    }

    /// `0.95 / L`, the default stepsize.
    pub fn auto_gamma(&self) -> Option<f64> {
        self.dual_lipschitz().filter(|l| *l > 0.0).map(|l| 0.95 / l)
    }

    /// The problem with `A ← D·A` and `g ← g∘D⁻¹`; dual variables become `D⁻¹y`.
    pub fn with_scaling(&self, scaling: DiagonalScaling) -> Result<Problem> {
        check_dim("scaling", self.dual_dim(), scaling.len())?;
        let d = scaling.weights();
        let combined = match &self.scaling {
            Some(prev) => DiagonalScaling::new(prev.weights().component_mul(d))?,
            None => scaling.clone(),
        };
        Ok(Problem {
            f: Arc::clone(&self.f),
            g: self.g.scaled(d)?,
            a: self.a.scale_rows(d),
            scaling: Some(combined),
            a_norm: OnceLock::new(),
            lipschitz: OnceLock::new(),
        })
    }

    pub fn jacobi_scaled(&self) -> Result<Problem> {
        self.with_scaling(jacobi_scaling(self)?)
    }

    /// Maps a dual vector of this (possibly scaled) problem back to the
    /// unscaled problem's dual space.
    pub fn unscale_dual(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.scaling {
            Some(s) => s.apply(y),
            None => y.clone(),
        }
    }

    /// Inverse of [`Problem::unscale_dual`].
    pub fn scale_dual(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.scaling {
            Some(s) => s.apply_inverse(y),
            None => y.clone(),
        }
    }

    /// `f*(−Aᵀy)` from `x = x(y)` via `f(x) + f*(−Aᵀy) = −⟨Ax, y⟩`.
    pub fn conjugate_f(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        -self.a.apply(x).dot(y) - self.f.value(x)
    }

    /// Dual objective `ψ(y) = f*(−Aᵀy) + g*(y)`; `None` if `g*` has no closed form.
    pub fn dual_value(&self, y: &DVector<f64>) -> Result<Option<f64>> {
        let x = self.x_step(y)?;
        Ok(self.g.conjugate_value(y).map(|gc| {
            if gc == f64::INFINITY {
                f64::INFINITY
            } else {
                self.conjugate_f(y, &x) + gc
            }
        }))
    }

    /// Primal objective `f(x) + g(Ax)`.
    pub fn primal_value(&self, x: &DVector<f64>) -> f64 {
        let gv = self.g.value(&self.a.apply(x));
        if gv == f64::INFINITY {
            f64::INFINITY
        } else {
            self.f.value(x) + gv
        }
    }
}
