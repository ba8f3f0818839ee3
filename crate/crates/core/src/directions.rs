//! Quasi-Newton direction engines for the fixed-point residual `R_γ(y) = 0`.
//!
//! Every engine maintains an approximation `H ≈ J R_γ⁻¹` from secant pairs
//! `(p, q)` with `H q = p`, and proposes `d = H (Ax − z)`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

const CURVATURE_EPS: f64 = 1e-12;
const DENOM_EPS: f64 = 1e-12;
/// Modified-Broyden safeguard: `θ` is chosen so that the Sherman–Morrison
/// denominator stays at least this far from zero.
const BROYDEN_BAR: f64 = 0.1;

pub const DEFAULT_MEMORY: usize = 20;

/// Dual step `p = ỹ − y` and residual change `q = R_γ(ỹ) − R_γ(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantPair {
    pub p: DVector<f64>,
    pub q: DVector<f64>,
}

impl SecantPair {
    pub fn new(p: DVector<f64>, q: DVector<f64>) -> Self {
        assert_eq!(p.len(), q.len(), "secant pair dimension mismatch");
        Self { p, q }
    }

    pub fn curvature(&self) -> f64 {
        self.p.dot(&self.q)
    }

    fn is_finite(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    Skipped,
}

/// Which quasi-Newton update drives the directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineKind {
    #[default]
    Lbfgs,
    Bfgs,
    Broyden,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Lbfgs => "lbfgs",
            EngineKind::Bfgs => "bfgs",
            EngineKind::Broyden => "broyden",
        })
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lbfgs" | "l-bfgs" => Ok(EngineKind::Lbfgs),
            "bfgs" => Ok(EngineKind::Bfgs),
            "broyden" => Ok(EngineKind::Broyden),
            other => Err(Error::Config(format!("unknown direction engine '{other}'"))),
        }
    }
}

/// Source of search directions for NAMA.
pub trait DirectionProvider {
    /// `d = H·r_neg` where `r_neg = Ax − z = −R_γ(y)`.
    fn direction(&mut self, r_neg: &DVector<f64>) -> DVector<f64>;

    fn push_pair(&mut self, pair: SecantPair) -> PushOutcome;

    /// Forget all curvature information.
    fn reset(&mut self);

    fn stored_pairs(&self) -> usize;

    /// Scale of the seed matrix `H₀ = s·I` used when no curvature is known.
    fn set_seed_scale(&mut self, _scale: f64) {}
}

/// Always proposes `d = 0`, which turns NAMA into AMA.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDirection;

impl DirectionProvider for ZeroDirection {
    fn direction(&mut self, r_neg: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(r_neg.len())
    }

    fn push_pair(&mut self, _pair: SecantPair) -> PushOutcome {
        PushOutcome::Skipped
    }

    fn reset(&mut self) {}

    fn stored_pairs(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone)]
struct StoredPair {
    p: DVector<f64>,
    q: DVector<f64>,
    rho: f64,
}

/// Ring buffer of the most recent secant pairs, newest last.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<StoredPair>,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            pairs: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn push(&mut self, pair: SecantPair) -> PushOutcome {
        let curv = pair.curvature();
        if !(curv > CURVATURE_EPS * pair.p.norm() * pair.q.norm()) {
            return PushOutcome::Skipped;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(StoredPair {
            rho: 1.0 / curv,
            p: pair.p,
            q: pair.q,
        });
        PushOutcome::Accepted
    }

    /// Two-loop recursion with seed `⟨p,q⟩/⟨q,q⟩·I` from the newest pair, or
    /// `seed·I` when empty.
    fn apply(&self, v: &DVector<f64>, seed: f64) -> DVector<f64> {
        let mut r = v.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for s in self.pairs.iter().rev() {
            let a = s.rho * s.p.dot(&r);
            r.axpy(-a, &s.q, 1.0);
            alphas.push(a);
        }
        let h0 = match self.pairs.back() {
            Some(s) => 1.0 / (s.rho * s.q.norm_squared()),
            None => seed,
        };
        r *= h0;
        for (s, a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = s.rho * s.q.dot(&r);
            r.axpy(a - b, &s.p, 1.0);
        }
        r
    }
}

/// Dense update rule for [`DenseQnState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseRule {
    /// Modified Broyden with Powell-type `θ` safeguard.
    Broyden,
    Bfgs,
}

/// Dense inverse approximation `H = B⁻¹`, created lazily at the first use.
#[derive(Debug, Clone)]
pub struct DenseQnState {
    h: Option<DMatrix<f64>>,
    rule: DenseRule,
}

impl DenseQnState {
    pub fn new(rule: DenseRule) -> Self {
        Self { h: None, rule }
    }

    pub fn rule(&self) -> DenseRule {
        self.rule
    }

    /// Current inverse approximation, if one has been formed.
    pub fn inverse(&self) -> Option<&DMatrix<f64>> {
        self.h.as_ref()
    }

    fn ensure(&mut self, m: usize, seed: f64) -> &mut DMatrix<f64> {
        self.h.get_or_insert_with(|| DMatrix::identity(m, m) * seed)
    }

    fn push(&mut self, pair: SecantPair, seed: f64) -> PushOutcome {
        let m = pair.p.len();
        let rule = self.rule;
        let current = self.ensure(m, seed);
        let (p, q) = (&pair.p, &pair.q);
        let updated = match rule {
            DenseRule::Bfgs => {
                let curv = p.dot(q);
                if !(curv > CURVATURE_EPS * p.norm() * q.norm()) {
                    return PushOutcome::Skipped;
                }
                let rho = 1.0 / curv;
                let hq = &*current * q;
                let qhq = q.dot(&hq);
                let mut next = current.clone();
                next.ger(-rho, p, &hq, 1.0);
                next.ger(-rho, &hq, p, 1.0);
                next.ger(rho * rho * qhq + rho, p, p, 1.0);
                // keep exact symmetry
                (&next + next.transpose()) * 0.5
            }
            DenseRule::Broyden => {
                let pp = p.norm_squared();
                if !(pp > 0.0) {
                    return PushOutcome::Skipped;
                }
                let hq = &*current * q;
                let php = p.dot(&hq);
                let delta = php / pp;
                let theta = if delta.abs() < BROYDEN_BAR {
                    let sign = if delta >= 0.0 { 1.0 } else { -1.0 };
                    (1.0 - BROYDEN_BAR * sign) / (1.0 - delta)
                } else {
                    1.0
                };
                let denom = (1.0 - theta) * pp + theta * php;
                if denom.abs() < DENOM_EPS * p.norm() * hq.norm().max(p.norm()) {
                    return PushOutcome::Skipped;
                }
                let pth = current.tr_mul(p);
                let mut next = current.clone();
                next.ger(theta / denom, &(p - &hq), &pth, 1.0);
                next
            }
        };
        if updated.iter().any(|v| !v.is_finite()) {
            return PushOutcome::Skipped;
        }
        *current = updated;
        PushOutcome::Accepted
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Lbfgs(LbfgsMemory),
    Dense(DenseQnState),
}

/// Quasi-Newton memory owned by one solve.
#[derive(Debug, Clone)]
pub struct DirectionState {
    engine: Engine,
    seed: f64,
    skipped: usize,
    accepted: usize,
}

impl DirectionState {
    pub fn new(kind: EngineKind, memory: usize) -> Self {
        let engine = match kind {
            EngineKind::Lbfgs => Engine::Lbfgs(LbfgsMemory::new(memory)),
            EngineKind::Bfgs => Engine::Dense(DenseQnState::new(DenseRule::Bfgs)),
            EngineKind::Broyden => Engine::Dense(DenseQnState::new(DenseRule::Broyden)),
        };
        Self {
            engine,
            seed: 1.0,
            skipped: 0,
            accepted: 0,
        }
    }

    pub fn lbfgs(memory: usize) -> Self {
        Self::new(EngineKind::Lbfgs, memory)
    }

    pub fn kind(&self) -> EngineKind {
        match &self.engine {
            Engine::Lbfgs(_) => EngineKind::Lbfgs,
            Engine::Dense(d) if d.rule == DenseRule::Bfgs => EngineKind::Bfgs,
            Engine::Dense(_) => EngineKind::Broyden,
        }
    }

    /// Number of pairs rejected by the curvature or denominator safeguards.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn accepted(&self) -> usize {
        self.accepted
    }

    /// Dense inverse approximation (dense engines only).
    pub fn dense_inverse(&self) -> Option<&DMatrix<f64>> {
        match &self.engine {
            Engine::Dense(d) => d.inverse(),
            Engine::Lbfgs(_) => None,
        }
    }
}

impl DirectionProvider for DirectionState {
    fn direction(&mut self, r_neg: &DVector<f64>) -> DVector<f64> {
        let d = match &mut self.engine {
            Engine::Lbfgs(mem) => mem.apply(r_neg, self.seed),
            Engine::Dense(state) => match &state.h {
                Some(h) => h * r_neg,
                None => r_neg * self.seed,
            },
        };
        if d.iter().all(|v| v.is_finite()) {
            d
        } else {
            DVector::zeros(r_neg.len())
        }
    }

    fn push_pair(&mut self, pair: SecantPair) -> PushOutcome {
        let outcome = if !pair.is_finite() {
            PushOutcome::Skipped
        } else {
            match &mut self.engine {
                Engine::Lbfgs(mem) => mem.push(pair),
                Engine::Dense(state) => state.push(pair, self.seed),
            }
        };
        match outcome {
            PushOutcome::Accepted => self.accepted += 1,
            PushOutcome::Skipped => self.skipped += 1,
        }
        outcome
    }

    fn reset(&mut self) {
        match &mut self.engine {
            Engine::Lbfgs(mem) => mem.pairs.clear(),
            Engine::Dense(state) => state.h = None,
        }
    }

    fn stored_pairs(&self) -> usize {
        match &self.engine {
            Engine::Lbfgs(mem) => mem.len(),
            Engine::Dense(state) => usize::from(state.h.is_some() && self.accepted > 0),
        }
    }

    fn set_seed_scale(&mut self, scale: f64) {
        if scale.is_finite() && scale > 0.0 {
            self.seed = scale;
        }
    }
}
