//! Linear maps, spectral-norm estimation and diagonal (Jacobi) dual scaling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::problem::Problem;

const POWER_SEED: u64 = 0x6e61_6d61;

/// Block-diagonal composition `diag(L_0, ..., L_N)` of dense blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<DMatrix<f64>>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Self {
        let mut row_offsets = Vec::with_capacity(blocks.len());
        let mut col_offsets = Vec::with_capacity(blocks.len());
        let (mut rows, mut cols) = (0, 0);
        for b in &blocks {
            row_offsets.push(rows);
            col_offsets.push(cols);
            rows += b.nrows();
            cols += b.ncols();
        }
        Self {
            blocks,
            row_offsets,
            col_offsets,
            rows,
            cols,
        }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }
}

/// A linear map `A: R^cols -> R^rows`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    Dense(DMatrix<f64>),
    BlockDiagonal(BlockDiagonal),
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        LinearMap::Dense(DMatrix::identity(n, n))
    }

    pub fn block_diagonal(blocks: Vec<DMatrix<f64>>) -> Self {
        LinearMap::BlockDiagonal(BlockDiagonal::new(blocks))
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::BlockDiagonal(b) => b.rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::BlockDiagonal(b) => b.cols,
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.cols(), "LinearMap::apply: wrong input length");
        match self {
            LinearMap::Dense(m) => m * x,
            LinearMap::BlockDiagonal(b) => {
                let mut out = DVector::zeros(b.rows);
                for ((blk, &r0), &c0) in b.blocks.iter().zip(&b.row_offsets).zip(&b.col_offsets) {
                    let seg = x.rows(c0, blk.ncols());
                    out.rows_mut(r0, blk.nrows()).gemv(1.0, blk, &seg, 0.0);
                }
                out
            }
        }
    }

    /// `Aᵀ y`.
    pub fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.rows(), "LinearMap::apply_adjoint: wrong input length");
        match self {
            LinearMap::Dense(m) => m.tr_mul(y),
            LinearMap::BlockDiagonal(b) => {
                let mut out = DVector::zeros(b.cols);
                for ((blk, &r0), &c0) in b.blocks.iter().zip(&b.row_offsets).zip(&b.col_offsets) {
                    let seg = y.rows(r0, blk.nrows());
                    out.rows_mut(c0, blk.ncols()).gemv_tr(1.0, blk, &seg, 0.0);
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearMap::Dense(m) => m.clone(),
            LinearMap::BlockDiagonal(b) => {
                let mut out = DMatrix::zeros(b.rows, b.cols);
                for ((blk, &r0), &c0) in b.blocks.iter().zip(&b.row_offsets).zip(&b.col_offsets) {
                    out.view_mut((r0, c0), (blk.nrows(), blk.ncols())).copy_from(blk);
                }
                out
            }
        }
    }

    /// The transposed map, keeping the representation.
    pub fn transpose(&self) -> LinearMap {
        match self {
            LinearMap::Dense(m) => LinearMap::Dense(m.transpose()),
            LinearMap::BlockDiagonal(b) => {
                LinearMap::block_diagonal(b.blocks.iter().map(|m| m.transpose()).collect())
            }
        }
    }

    /// `diag(d) · A`.
    pub fn scale_rows(&self, d: &DVector<f64>) -> LinearMap {
        assert_eq!(d.len(), self.rows());
        match self {
            LinearMap::Dense(m) => {
                let mut out = m.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                LinearMap::Dense(out)
            }
            LinearMap::BlockDiagonal(b) => {
                let blocks = b
                    .blocks
                    .iter()
                    .zip(&b.row_offsets)
                    .map(|(blk, &r0)| {
                        let mut out = blk.clone();
                        for (i, mut row) in out.row_iter_mut().enumerate() {
                            row *= d[r0 + i];
                        }
                        out
                    })
                    .collect();
                LinearMap::block_diagonal(blocks)
            }
        }
    }
}

/// Result of a power-iteration estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl NormEstimate {
    /// Estimate inflated by `(1 + tol)`, suitable as an upper bound in stepsize rules.
    pub fn upper(&self, tol: f64) -> f64 {
        self.value * (1.0 + tol)
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration with a fixed seed. The Rayleigh quotient is the returned value.
pub fn power_iteration<F>(dim: usize, apply: F, tol: f64, max_iter: usize) -> NormEstimate
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return NormEstimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    v /= v.norm();
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let w = apply(&v);
        let next = v.dot(&w);
        let nw = w.norm();
        if nw == 0.0 {
            return NormEstimate {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        v = w / nw;
        if it > 1 && (next - lambda).abs() <= tol * next.abs() {
            return NormEstimate {
                value: next,
                converged: true,
                iterations: it,
            };
        }
        lambda = next;
    }
    NormEstimate {
        value: lambda,
        converged: false,
        iterations: max_iter,
    }
}

/// Spectral norm `‖A‖` via power iteration on `AᵀA`.
pub fn operator_norm(a: &LinearMap, tol: f64, max_iter: usize) -> NormEstimate {
    // eigenvalue tolerance tol on σ² gives roughly tol/2 on σ
    let est = power_iteration(a.cols(), |v| a.apply_adjoint(&a.apply(v)), tol, max_iter);
    NormEstimate {
        value: est.value.max(0.0).sqrt(),
        ..est
    }
}

/// A positive diagonal change of variables in the dual space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalScaling {
    d: DVector<f64>,
}

impl DiagonalScaling {
    pub fn new(d: DVector<f64>) -> Result<Self> {
        if let Some(i) = d.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Scaling(format!("entry {i} is {} (must be positive)", d[i])));
        }
        Ok(Self { d })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// `D v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_mul(&self.d)
    }

    /// `D⁻¹ v`.
    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_div(&self.d)
    }
}

/// Diagonal of the dual smooth Hessian `A ∇²f* Aᵀ`, one x-step per dual unit vector.
pub fn dual_hessian_diagonal(problem: &Problem) -> Result<DVector<f64>> {
    if !problem.f().is_affine() {
        return Err(Error::Unsupported(
            "Jacobi scaling needs an affine x-step (quadratic f)".into(),
        ));
    }
    let m = problem.dual_dim();
    let base = problem.a().apply(&problem.x_step(&DVector::zeros(m))?);
    let mut h = DVector::zeros(m);
    let mut e = DVector::zeros(m);
    for i in 0..m {
        e[i] = 1.0;
        let ax = problem.a().apply(&problem.x_step(&e)?);
        // x(y) = ∇f*(-Aᵀy) so d(Ax)/dy = -A∇²f*Aᵀ
        h[i] = base[i] - ax[i];
        e[i] = 0.0;
    }
    Ok(h)
}

/// Jacobi scaling `d_i = 1/sqrt(h_ii)`. Coordinates belonging to a
/// non-separable penalty block (ball, distance) share one weight computed
/// from the block's mean diagonal so the block keeps a closed-form prox.
pub fn jacobi_scaling(problem: &Problem) -> Result<DiagonalScaling> {
    let h = dual_hessian_diagonal(problem)?;
    if let Some(i) = h.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Scaling(format!(
            "dual Hessian diagonal entry {i} is {:e}; f-oracle is not strongly convex along row {i}",
            h[i]
        )));
    }
    let mut d = h.map(|v| 1.0 / v.sqrt());
    for (offset, len) in problem.g().coupled_ranges() {
        let mean = h.rows(offset, len).mean();
        d.rows_mut(offset, len).fill(1.0 / mean.sqrt());
    }
    check_dim("jacobi_scaling", problem.dual_dim(), d.len())?;
    DiagonalScaling::new(d)
}
