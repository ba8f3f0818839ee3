//! f-oracles (x-step solvers) and prox-friendly g terms.
//!
//! Conventions: `Penalty::prox(v, λ)` is `prox_{λg}(v)`; values of `+∞` are
//! carried as `f64::INFINITY` and every sum involving one short-circuits.

use std::fmt::Debug;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};

/// Relative slack used when testing membership in closed sets after
/// floating-point projections.
const FEAS_TOL: f64 = 1e-9;

/// Strongly convex smooth term `f`, accessed through its x-step.
pub trait SmoothOracle: Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// `argmin_x { f(x) + ⟨v, x⟩ }`, i.e. `∇f*(-v)`.
    fn minimize_linear(&self, v: &DVector<f64>) -> Result<DVector<f64>>;

    fn value(&self, x: &DVector<f64>) -> f64;

    /// Strong-convexity modulus `μ_f`, if known.
    fn strong_convexity(&self) -> Option<f64>;

    /// True when `v ↦ minimize_linear(v)` is affine (quadratic f).
    fn is_affine(&self) -> bool {
        false
    }
}

/// `f(x) = ½ xᵀHx + qᵀx` with `H` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    h: DMatrix<f64>,
    q: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    mu: f64,
}

impl QuadraticOracle {
    pub fn new(h: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Oracle(format!("H is {}x{}", h.nrows(), h.ncols())));
        }
        check_dim("quadratic q", h.nrows(), q.len())?;
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-10 * h.amax().max(1.0) {
            return Err(Error::Oracle(format!("H is not symmetric (max asymmetry {asym:e})")));
        }
        let mu = if h.nrows() == 0 {
            f64::INFINITY
        } else {
            h.clone().symmetric_eigenvalues().min()
        };
        let chol = Cholesky::new(h.clone())
            .ok_or_else(|| Error::Oracle("H is not positive definite".into()))?;
        Ok(Self { h, q, chol, mu })
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.q
    }
}

impl SmoothOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn minimize_linear(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("quadratic x-step", self.dim(), v.len())?;
        let rhs = -(&self.q + v);
        Ok(self.chol.solve(&rhs))
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.q.dot(x)
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.mu)
    }

    fn is_affine(&self) -> bool {
        true
    }
}

fn check_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Result<()> {
    check_dim("box bounds", lower.len(), upper.len())?;
    for j in 0..lower.len() {
        if lower[j].is_nan() || upper[j].is_nan() || lower[j] > upper[j] {
            return Err(Error::InvalidSet(format!(
                "bound {j}: lower {} > upper {}",
                lower[j], upper[j]
            )));
        }
    }
    Ok(())
}

/// Projection onto the box `[a, b]`. The result does not depend on `λ`.
pub fn prox_box(v: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_bounds(a, b)?;
    check_dim("prox_box", a.len(), v.len())?;
    debug_assert!(lambda > 0.0);
    Ok(clamp(v, a, b))
}

fn clamp(v: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |j, _| v[j].max(a[j]).min(b[j]))
}

/// Prox of `λ Σ α_j |z_j − Π_[a_j,b_j](z_j)|`.
pub fn prox_soft_box(
    v: &DVector<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_bounds(a, b)?;
    check_dim("prox_soft_box", a.len(), v.len())?;
    check_dim("prox_soft_box weights", a.len(), alpha.len())?;
    Ok(DVector::from_fn(v.len(), |j, _| soft_box_1d(v[j], a[j], b[j], lambda * alpha[j])))
}

fn soft_box_1d(v: f64, a: f64, b: f64, shrink: f64) -> f64 {
    if v > b {
        b.max(v - shrink)
    } else if v < a {
        a.min(v + shrink)
    } else {
        v
    }
}

/// Projection onto the Euclidean ball of radius `r` centered at the origin.
pub fn prox_ball2(v: &DVector<f64>, r: f64, _lambda: f64) -> DVector<f64> {
    let n = v.norm();
    if n <= r {
        v.clone()
    } else {
        v * (r / n)
    }
}

/// `prox_{λg*}(v) = v − λ prox_{λ⁻¹g}(v/λ)` (Moreau identity).
pub fn prox_conjugate(g: &Penalty, v: &DVector<f64>, lambda: f64) -> DVector<f64> {
    v - g.prox(&(v / lambda), 1.0 / lambda) * lambda
}

/// Support function of `[a, b]` at `y`. Entries of `y` within `slack` of zero
/// are treated as zero on an unbounded side.
fn support_1d(a: f64, b: f64, y: f64, slack: f64) -> f64 {
    if y > 0.0 {
        if b.is_finite() {
            b * y
        } else if y <= slack {
            0.0
        } else {
            f64::INFINITY
        }
    } else if y < 0.0 {
        if a.is_finite() {
            a * y
        } else if -y <= slack {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    }
}

fn slack_for(y: &DVector<f64>) -> f64 {
    FEAS_TOL * y.amax().max(1.0)
}

/// Ordered partition of `R^m` into blocks, each with its own penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSum {
    blocks: Vec<(usize, Penalty)>,
    dim: usize,
}

impl BlockSum {
    /// Blocks are laid out contiguously in the given order.
    pub fn new(parts: Vec<Penalty>) -> Self {
        let mut blocks = Vec::with_capacity(parts.len());
        let mut offset = 0;
        for p in parts {
            let len = p.dim();
            blocks.push((offset, p));
            offset += len;
        }
        Self { blocks, dim: offset }
    }

    /// Blocks given by explicit offsets; they must partition `[0, m)`.
    pub fn with_offsets(blocks: Vec<(usize, Penalty)>) -> Result<Self> {
        let mut expected = 0;
        for (offset, p) in &blocks {
            if *offset != expected {
                return Err(Error::InvalidSet(format!(
                    "block offsets must partition the range: expected offset {expected}, got {offset}"
                )));
            }
            expected += p.dim();
        }
        Ok(Self {
            blocks,
            dim: expected,
        })
    }

    pub fn blocks(&self) -> &[(usize, Penalty)] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Proper closed convex `g`, from a fixed catalog of prox-friendly kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    /// Indicator of `[lower, upper]`; infinite bounds allowed.
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Indicator of `{z : z ≤ upper}`.
    UpperBound { upper: DVector<f64> },
    /// Indicator of `{z : ‖z‖ ≤ radius}`.
    Ball { radius: f64, dim: usize },
    /// `Σ α_j |z_j − Π_[a_j,b_j](z_j)|`.
    SoftBox {
        lower: DVector<f64>,
        upper: DVector<f64>,
        weights: DVector<f64>,
    },
    /// `α · dist_C(z)` for the box `C = [lower, upper]`.
    Distance {
        lower: DVector<f64>,
        upper: DVector<f64>,
        weight: f64,
    },
    Sum(BlockSum),
}

impl Penalty {
    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        Ok(Penalty::Box { lower, upper })
    }

    pub fn upper_bound(upper: DVector<f64>) -> Result<Self> {
        if upper.iter().any(|b| b.is_nan()) {
            return Err(Error::InvalidSet("NaN upper bound".into()));
        }
        Ok(Penalty::UpperBound { upper })
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidSet(format!("ball radius {radius} must be positive")));
        }
        Ok(Penalty::Ball { radius, dim })
    }

    pub fn soft_box(lower: DVector<f64>, upper: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        check_dim("soft box weights", lower.len(), weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSet("soft-box weights must be positive and finite".into()));
        }
        Ok(Penalty::SoftBox {
            lower,
            upper,
            weights,
        })
    }

    pub fn distance(lower: DVector<f64>, upper: DVector<f64>, weight: f64) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidSet(format!("distance weight {weight} must be positive")));
        }
        Ok(Penalty::Distance {
            lower,
            upper,
            weight,
        })
    }

    pub fn sum(parts: Vec<Penalty>) -> Self {
        Penalty::Sum(BlockSum::new(parts))
    }

    pub fn dim(&self) -> usize {
        match self {
            Penalty::Box { lower, .. } => lower.len(),
            Penalty::UpperBound { upper } => upper.len(),
            Penalty::Ball { dim, .. } => *dim,
            Penalty::SoftBox { lower, .. } => lower.len(),
            Penalty::Distance { lower, .. } => lower.len(),
            Penalty::Sum(s) => s.dim(),
        }
    }

    /// True when `g` only takes values in `{0, +∞}`.
    pub fn is_indicator(&self) -> bool {
        match self {
            Penalty::Box { .. } | Penalty::UpperBound { .. } | Penalty::Ball { .. } => true,
            Penalty::SoftBox { .. } | Penalty::Distance { .. } => false,
            Penalty::Sum(s) => s.blocks.iter().all(|(_, p)| p.is_indicator()),
        }
    }

    /// `prox_{λg}(v)`.
    pub fn prox(&self, v: &DVector<f64>, lambda: f64) -> DVector<f64> {
        assert_eq!(v.len(), self.dim(), "prox: wrong input length");
        match self {
            Penalty::Box { lower, upper } => clamp(v, lower, upper),
            Penalty::UpperBound { upper } => v.zip_map(upper, |vj, bj| vj.min(bj)),
            Penalty::Ball { radius, .. } => prox_ball2(v, *radius, lambda),
            Penalty::SoftBox {
                lower,
                upper,
                weights,
            } => DVector::from_fn(v.len(), |j, _| {
                soft_box_1d(v[j], lower[j], upper[j], lambda * weights[j])
            }),
            Penalty::Distance {
                lower,
                upper,
                weight,
            } => {
                let p = clamp(v, lower, upper);
                let diff = v - &p;
                let dist = diff.norm();
                let shrink = lambda * weight;
                if dist <= shrink {
                    p
                } else {
                    v - diff * (shrink / dist)
                }
            }
            Penalty::Sum(s) => {
                let mut out = DVector::zeros(v.len());
                for (offset, p) in &s.blocks {
                    let len = p.dim();
                    let seg = v.rows(*offset, len).into_owned();
                    out.rows_mut(*offset, len).copy_from(&p.prox(&seg, lambda));
                }
                out
            }
        }
    }

    /// `g(z)`, possibly `+∞`.
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        assert_eq!(z.len(), self.dim(), "value: wrong input length");
        match self {
            Penalty::Box { lower, upper } => {
                let inside = (0..z.len()).all(|j| {
                    let tol = FEAS_TOL * (1.0 + z[j].abs());
                    z[j] >= lower[j] - tol && z[j] <= upper[j] + tol
                });
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Penalty::UpperBound { upper } => {
                if (0..z.len()).all(|j| z[j] <= upper[j] + FEAS_TOL * (1.0 + z[j].abs())) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Penalty::Ball { radius, .. } => {
                if z.norm() <= radius * (1.0 + FEAS_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Penalty::SoftBox {
                lower,
                upper,
                weights,
            } => (0..z.len())
                .map(|j| weights[j] * (z[j] - z[j].max(lower[j]).min(upper[j])).abs())
                .sum(),
            Penalty::Distance {
                lower,
                upper,
                weight,
            } => weight * (z - clamp(z, lower, upper)).norm(),
            Penalty::Sum(s) => {
                let mut total = 0.0;
                for (offset, p) in &s.blocks {
                    let v = p.value(&z.rows(*offset, p.dim()).into_owned());
                    if v == f64::INFINITY {
                        return f64::INFINITY;
                    }
                    total += v;
                }
                total
            }
        }
    }

    /// Closed-form `g*(y)`, possibly `+∞`. Every catalog kind has one.
    pub fn conjugate_value(&self, y: &DVector<f64>) -> Option<f64> {
        assert_eq!(y.len(), self.dim(), "conjugate_value: wrong input length");
        let slack = slack_for(y);
        let value = match self {
            Penalty::Box { lower, upper } => {
                let mut total = 0.0;
                for j in 0..y.len() {
                    total += support_1d(lower[j], upper[j], y[j], slack);
                    if total == f64::INFINITY {
                        break;
                    }
                }
                total
            }
            Penalty::UpperBound { upper } => {
                let mut total = 0.0;
                for j in 0..y.len() {
                    total += support_1d(f64::NEG_INFINITY, upper[j], y[j], slack);
                    if total == f64::INFINITY {
                        break;
                    }
                }
                total
            }
            Penalty::Ball { radius, .. } => radius * y.norm(),
            Penalty::SoftBox {
                lower,
                upper,
                weights,
            } => {
                let mut total = 0.0;
                for j in 0..y.len() {
                    if y[j].abs() > weights[j] * (1.0 + FEAS_TOL) {
                        return Some(f64::INFINITY);
                    }
                    total += support_1d(lower[j], upper[j], y[j], slack);
                }
                total
            }
            Penalty::Distance {
                lower,
                upper,
                weight,
            } => {
                if y.norm() > weight * (1.0 + FEAS_TOL) {
                    return Some(f64::INFINITY);
                }
                (0..y.len())
                    .map(|j| support_1d(lower[j], upper[j], y[j], slack))
                    .sum()
            }
            Penalty::Sum(s) => {
                let mut total = 0.0;
                for (offset, p) in &s.blocks {
                    let v = p.conjugate_value(&y.rows(*offset, p.dim()).into_owned())?;
                    if v == f64::INFINITY {
                        return Some(f64::INFINITY);
                    }
                    total += v;
                }
                total
            }
        };
        Some(value)
    }

    /// Coordinate ranges whose penalty is not separable (ball, distance).
    pub fn coupled_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect_coupled(0, &mut out);
        out
    }

    fn collect_coupled(&self, base: usize, out: &mut Vec<(usize, usize)>) {
        match self {
            Penalty::Ball { dim, .. } => out.push((base, *dim)),
            Penalty::Distance { lower, .. } => out.push((base, lower.len())),
            Penalty::Sum(s) => {
                for (offset, p) in &s.blocks {
                    p.collect_coupled(base + offset, out);
                }
            }
            _ => {}
        }
    }

    /// The penalty `ẑ ↦ g(D⁻¹ẑ)` for positive weights `d`. Non-separable
    /// blocks require a constant weight across the block.
    pub fn scaled(&self, d: &DVector<f64>) -> Result<Penalty> {
        check_dim("penalty scaling", self.dim(), d.len())?;
        let uniform = |d: &DVector<f64>| -> Result<f64> {
            let c = d[0];
            if d.iter().any(|v| (v - c).abs() > 1e-14 * c) {
                return Err(Error::Scaling(
                    "non-separable penalty block needs a uniform scaling weight".into(),
                ));
            }
            Ok(c)
        };
        Ok(match self {
            Penalty::Box { lower, upper } => Penalty::Box {
                lower: lower.component_mul(d),
                upper: upper.component_mul(d),
            },
            Penalty::UpperBound { upper } => Penalty::UpperBound {
                upper: upper.component_mul(d),
            },
            Penalty::Ball { radius, dim } => {
                let c = if *dim == 0 { 1.0 } else { uniform(d)? };
                Penalty::Ball {
                    radius: radius * c,
                    dim: *dim,
                }
            }
            Penalty::SoftBox {
                lower,
                upper,
                weights,
            } => Penalty::SoftBox {
                lower: lower.component_mul(d),
                upper: upper.component_mul(d),
                weights: weights.component_div(d),
            },
            Penalty::Distance {
                lower,
                upper,
                weight,
            } => {
                let c = if lower.is_empty() { 1.0 } else { uniform(d)? };
                Penalty::Distance {
                    lower: lower * c,
                    upper: upper * c,
                    weight: weight / c,
                }
            }
            Penalty::Sum(s) => {
                let mut blocks = Vec::with_capacity(s.blocks.len());
                for (offset, p) in &s.blocks {
                    let seg = d.rows(*offset, p.dim()).into_owned();
                    blocks.push((*offset, p.scaled(&seg)?));
                }
                Penalty::Sum(BlockSum::with_offsets(blocks)?)
            }
        })
    }
}
