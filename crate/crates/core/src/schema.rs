//! JSON problem files.
//!
//! Matrices are row-major arrays of rows; `null` in a bound stands for ±∞.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{Penalty, QuadraticOracle};
use crate::mpc::{build_problem, MpcSpec, Stage, StageConstraint, TerminalStage};
use crate::operator::LinearMap;
use crate::problem::Problem;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyFile {
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    UpperBound {
        upper: Vec<Option<f64>>,
    },
    Ball {
        radius: f64,
        dim: usize,
    },
    SoftBox {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
        weights: Vec<f64>,
    },
    Distance {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
        weight: f64,
    },
    Sum {
        parts: Vec<PenaltyFile>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapFile {
    Identity { n: usize },
    Dense { rows: Rows },
    BlockDiagonal { blocks: Vec<Rows> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub map: Rows,
    pub penalty: PenaltyFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageFile {
    pub phi: Rows,
    pub gamma: Rows,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    pub q: Rows,
    pub r: Rows,
    #[serde(default)]
    pub x_ref: Option<Vec<f64>>,
    #[serde(default)]
    pub u_ref: Option<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalFile {
    pub q: Rows,
    #[serde(default)]
    pub x_ref: Option<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSpecFile {
    pub nx: usize,
    pub nu: usize,
    pub x_init: Vec<f64>,
    pub stages: Vec<StageFile>,
    pub terminal: TerminalFile,
}

/// A problem file: either an explicit QP-like triple or an MPC spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemFile {
    Quadratic {
        /// Hessian of `f(x) = ½xᵀHx + qᵀx`.
        h: Rows,
        q: Vec<f64>,
        a: MapFile,
        g: PenaltyFile,
        #[serde(default)]
        y0: Option<Vec<f64>>,
    },
    Mpc {
        spec: MpcSpecFile,
        #[serde(default)]
        y0: Option<Vec<f64>>,
    },
}

fn bound(v: &[Option<f64>], inf: f64) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|b| b.unwrap_or(inf)))
}

fn opt_bound(v: &DVector<f64>) -> Vec<Option<f64>> {
    v.iter().map(|b| b.is_finite().then_some(*b)).collect()
}

fn matrix(rows: &Rows, what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Spec(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Like [`matrix`], but an empty row list means `0 × cols`.
fn matrix_cols(rows: &Rows, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        Ok(DMatrix::zeros(0, cols))
    } else {
        matrix(rows, what)
    }
}

fn rows_of(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn vector_or_zero(v: &Option<Vec<f64>>, n: usize) -> DVector<f64> {
    v.as_deref().map_or_else(|| DVector::zeros(n), vector)
}

impl PenaltyFile {
    pub fn to_penalty(&self) -> Result<Penalty> {
        const INF: f64 = f64::INFINITY;
        match self {
            PenaltyFile::Box { lower, upper } => Penalty::boxed(bound(lower, -INF), bound(upper, INF)),
            PenaltyFile::UpperBound { upper } => Penalty::upper_bound(bound(upper, INF)),
            PenaltyFile::Ball { radius, dim } => Penalty::ball(*radius, *dim),
            PenaltyFile::SoftBox { lower, upper, weights } => {
                Penalty::soft_box(bound(lower, -INF), bound(upper, INF), vector(weights))
            }
            PenaltyFile::Distance { lower, upper, weight } => {
                Penalty::distance(bound(lower, -INF), bound(upper, INF), *weight)
            }
            PenaltyFile::Sum { parts } => Ok(Penalty::sum(
                parts.iter().map(PenaltyFile::to_penalty).collect::<Result<_>>()?,
            )),
        }
    }

    pub fn from_penalty(p: &Penalty) -> Self {
        match p {
            Penalty::Box { lower, upper } => PenaltyFile::Box {
                lower: opt_bound(lower),
                upper: opt_bound(upper),
            },
            Penalty::UpperBound { upper } => PenaltyFile::UpperBound { upper: opt_bound(upper) },
            Penalty::Ball { radius, dim } => PenaltyFile::Ball {
                radius: *radius,
                dim: *dim,
            },
            Penalty::SoftBox { lower, upper, weights } => PenaltyFile::SoftBox {
                lower: opt_bound(lower),
                upper: opt_bound(upper),
                weights: weights.iter().copied().collect(),
            },
            Penalty::Distance { lower, upper, weight } => PenaltyFile::Distance {
                lower: opt_bound(lower),
                upper: opt_bound(upper),
                weight: *weight,
            },
            Penalty::Sum(sum) => PenaltyFile::Sum {
                parts: sum.blocks().iter().map(|(_, p)| Self::from_penalty(p)).collect(),
            },
        }
    }
}

impl MapFile {
    pub fn to_map(&self) -> Result<LinearMap> {
        Ok(match self {
            MapFile::Identity { n } => LinearMap::identity(*n),
            MapFile::Dense { rows } => LinearMap::Dense(matrix(rows, "A")?),
            MapFile::BlockDiagonal { blocks } => LinearMap::block_diagonal(
                blocks
                    .iter()
                    .map(|b| matrix(b, "A block"))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    pub fn from_map(a: &LinearMap) -> Self {
        match a {
            LinearMap::Dense(m) => MapFile::Dense { rows: rows_of(m) },
            LinearMap::BlockDiagonal(b) => MapFile::BlockDiagonal {
                blocks: b.blocks().iter().map(rows_of).collect(),
            },
        }
    }
}

impl ConstraintFile {
    fn to_constraint(&self, cols: usize) -> Result<StageConstraint> {
        StageConstraint::new(matrix_cols(&self.map, cols, "constraint map")?, self.penalty.to_penalty()?)
    }

    fn from_constraint(c: &StageConstraint) -> Self {
        Self {
            map: rows_of(&c.map),
            penalty: PenaltyFile::from_penalty(&c.penalty),
        }
    }
}

impl MpcSpecFile {
    pub fn to_spec(&self) -> Result<MpcSpec> {
        let (nx, nu) = (self.nx, self.nu);
        let stages = self
            .stages
            .iter()
            .map(|s| {
                Ok(Stage {
                    phi: matrix(&s.phi, "phi")?,
                    gamma: matrix_cols(&s.gamma, nu, "gamma")?,
                    c: vector_or_zero(&s.c, nx),
                    q: matrix(&s.q, "q")?,
                    r: matrix_cols(&s.r, nu, "r")?,
                    x_ref: vector_or_zero(&s.x_ref, nx),
                    u_ref: vector_or_zero(&s.u_ref, nu),
                    constraints: s
                        .constraints
                        .iter()
                        .map(|c| c.to_constraint(nx + nu))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        let t = &self.terminal;
        let spec = MpcSpec {
            nx,
            nu,
            stages,
            terminal: TerminalStage {
                q: matrix(&t.q, "terminal q")?,
                x_ref: vector_or_zero(&t.x_ref, nx),
                constraints: t
                    .constraints
                    .iter()
                    .map(|c| c.to_constraint(nx))
                    .collect::<Result<_>>()?,
            },
            x_init: vector(&self.x_init),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &MpcSpec) -> Self {
        let v = |x: &DVector<f64>| x.iter().copied().collect::<Vec<_>>();
        Self {
            nx: spec.nx,
            nu: spec.nu,
            x_init: v(&spec.x_init),
            stages: spec
                .stages
                .iter()
                .map(|s| StageFile {
                    phi: rows_of(&s.phi),
                    gamma: rows_of(&s.gamma),
                    c: Some(v(&s.c)),
                    q: rows_of(&s.q),
                    r: rows_of(&s.r),
                    x_ref: Some(v(&s.x_ref)),
                    u_ref: Some(v(&s.u_ref)),
                    constraints: s.constraints.iter().map(ConstraintFile::from_constraint).collect(),
                })
                .collect(),
            terminal: TerminalFile {
                q: rows_of(&spec.terminal.q),
                x_ref: Some(v(&spec.terminal.x_ref)),
                constraints: spec
                    .terminal
                    .constraints
                    .iter()
                    .map(ConstraintFile::from_constraint)
                    .collect(),
            },
        }
    }
}

impl ProblemFile {
    pub fn quadratic(h: &DMatrix<f64>, q: &DVector<f64>, a: &LinearMap, g: &Penalty) -> Self {
        ProblemFile::Quadratic {
            h: rows_of(h),
            q: q.iter().copied().collect(),
            a: MapFile::from_map(a),
            g: PenaltyFile::from_penalty(g),
            y0: None,
        }
    }

    pub fn mpc(spec: &MpcSpec) -> Self {
        ProblemFile::Mpc {
            spec: MpcSpecFile::from_spec(spec),
            y0: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Builds the problem and the initial dual point (zero unless given).
    pub fn build(&self) -> Result<(Problem, DVector<f64>)> {
        let (problem, y0) = match self {
            ProblemFile::Quadratic { h, q, a, g, y0 } => {
                let f = QuadraticOracle::new(matrix(h, "H")?, vector(q))?;
                let problem = Problem::new(Arc::new(f), g.to_penalty()?, a.to_map()?)?;
                (problem, y0)
            }
            ProblemFile::Mpc { spec, y0 } => (build_problem(&spec.to_spec()?)?, y0),
        };
        let y0 = match y0 {
            Some(v) => {
                if v.len() != problem.dual_dim() {
                    return Err(Error::Dimension {
                        context: "y0",
                        expected: problem.dual_dim(),
                        got: v.len(),
                    });
                }
                vector(v)
            }
            None => DVector::zeros(problem.dual_dim()),
        };
        Ok((problem, y0))
    }
}
