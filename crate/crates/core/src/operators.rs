//! Bounded operators on `C^n`: structured variants with exact arithmetic
//! where the structure allows it, dense fallbacks everywhere else.
//!
//! Operators are immutable values; composites share their children through
//! `Arc`, so cloning an operator (or a long composition chain) is cheap and
//! thread-safe.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg;
use crate::space::Vector;

/// Largest dimension [`Operator::materialize`] will densify.
pub const DENSE_DIM_CAP: usize = 256;
/// Cap on the exponent accepted by [`Operator::power_apply`].
pub const POWER_APPLY_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator entries must be finite")]
    NonFinite,
    #[error("operator needs dimension >= 1")]
    EmptyOperator,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("power {requested} exceeds the application budget {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },
    #[error("dimension {dim} exceeds the densification cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },
    #[error("norm estimation stalled after {iterations} power iterations")]
    NonConvergence { iterations: usize },
    #[error("truncation window rejected: {reason}")]
    WindowViolation { reason: String },
}

#[derive(Debug, Clone)]
pub enum OperatorKind {
    /// Arbitrary dense matrix.
    Dense(Arc<DMatrix<Complex64>>),
    /// Entrywise multiplication by a fixed diagonal.
    Diagonal(Arc<Vec<Complex64>>),
    /// Weighted backward shift: `(T x)_k = w x_{k+1}`, last coordinate 0.
    BackwardShift(Complex64),
    /// Weighted forward shift: `(T x)_k = w x_{k-1}`, first coordinate 0.
    ForwardShift(Complex64),
    /// `a I`.
    Scalar(Complex64),
    /// `f o g`: apply `g`, then `f`.
    Composition(Arc<Operator>, Arc<Operator>),
    /// Block-diagonal sum of the parts.
    DirectSum(Arc<Vec<Operator>>),
    /// Fixes `e_1`, annihilates every other basis vector.
    RankOneFix,
}

/// Norm value together with the uncertainty of the estimator that produced
/// it. Structured norms are exact (`error_bound == 0`); dense estimates carry
/// the power-iteration residual bound and are always lower bounds.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error_bound: f64,
}

impl NormEstimate {
    fn exact(value: f64) -> Self {
        NormEstimate {
            value,
            error_bound: 0.0,
        }
    }

    /// Largest value consistent with the estimate.
    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }
}

#[derive(Debug, Clone)]
pub struct Operator {
    kind: OperatorKind,
    dim: usize,
}

fn finite(c: Complex64) -> bool {
    c.re.is_finite() && c.im.is_finite()
}

impl Operator {
    pub fn dense(matrix: DMatrix<Complex64>) -> Result<Self, OperatorError> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(OperatorError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(OperatorError::EmptyOperator);
        }
        if matrix.iter().any(|c| !finite(*c)) {
            return Err(OperatorError::NonFinite);
        }
        Ok(Operator {
            dim: rows,
            kind: OperatorKind::Dense(Arc::new(matrix)),
        })
    }

    pub fn diagonal(entries: Vec<Complex64>) -> Result<Self, OperatorError> {
        if entries.is_empty() {
            return Err(OperatorError::EmptyOperator);
        }
        if entries.iter().any(|c| !finite(*c)) {
            return Err(OperatorError::NonFinite);
        }
        Ok(Operator {
            dim: entries.len(),
            kind: OperatorKind::Diagonal(Arc::new(entries)),
        })
    }

    pub fn backward_shift(dim: usize, weight: Complex64) -> Result<Self, OperatorError> {
        if dim == 0 {
            return Err(OperatorError::EmptyOperator);
        }
        if !finite(weight) {
            return Err(OperatorError::NonFinite);
        }
        Ok(Operator {
            dim,
            kind: OperatorKind::BackwardShift(weight),
        })
    }

    pub fn forward_shift(dim: usize, weight: Complex64) -> Result<Self, OperatorError> {
        if dim == 0 {
            return Err(OperatorError::EmptyOperator);
        }
        if !finite(weight) {
            return Err(OperatorError::NonFinite);
        }
        Ok(Operator {
            dim,
            kind: OperatorKind::ForwardShift(weight),
        })
    }

    pub fn scalar(dim: usize, a: Complex64) -> Result<Self, OperatorError> {
        if dim == 0 {
            return Err(OperatorError::EmptyOperator);
        }
        if !finite(a) {
            return Err(OperatorError::NonFinite);
        }
        Ok(Operator {
            dim,
            kind: OperatorKind::Scalar(a),
        })
    }

    pub fn identity(dim: usize) -> Result<Self, OperatorError> {
        Operator::scalar(dim, Complex64::new(1.0, 0.0))
    }

    pub fn rank_one_fix(dim: usize) -> Result<Self, OperatorError> {
        if dim == 0 {
            return Err(OperatorError::EmptyOperator);
        }
        Ok(Operator {
            dim,
            kind: OperatorKind::RankOneFix,
        })
    }

    /// `f o g`: the returned operator applies `g` first.
    pub fn compose(f: Operator, g: Operator) -> Result<Self, OperatorError> {
        if f.dim != g.dim {
            return Err(OperatorError::DimensionMismatch {
                expected: f.dim,
                got: g.dim,
            });
        }
        Ok(Operator {
            dim: f.dim,
            kind: OperatorKind::Composition(Arc::new(f), Arc::new(g)),
        })
    }

    /// Extend a composition chain by one more factor on the left. Cheap:
    /// the existing chain is shared, not cloned.
    pub fn compose_left(f: &Operator, chain: &Operator) -> Result<Self, OperatorError> {
        if f.dim != chain.dim {
            return Err(OperatorError::DimensionMismatch {
                expected: f.dim,
                got: chain.dim,
            });
        }
        Ok(Operator {
            dim: f.dim,
            kind: OperatorKind::Composition(Arc::new(f.clone()), Arc::new(chain.clone())),
        })
    }

    pub fn direct_sum(parts: Vec<Operator>) -> Result<Self, OperatorError> {
        if parts.is_empty() {
            return Err(OperatorError::EmptyOperator);
        }
        let dim = parts.iter().map(|p| p.dim).sum();
        Ok(Operator {
            dim,
            kind: OperatorKind::DirectSum(Arc::new(parts)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// If the operator is (a composition of) scalar multiples of the
    /// identity, return the combined scalar.
    pub fn as_scalar(&self) -> Option<Complex64> {
        match &self.kind {
            OperatorKind::Scalar(a) => Some(*a),
            OperatorKind::Composition(f, g) => Some(f.as_scalar()? * g.as_scalar()?),
            _ => None,
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        assert_eq!(
            self.dim,
            x.dim(),
            "operator of dim {} applied to vector of dim {}",
            self.dim,
            x.dim()
        );
        let n = self.dim;
        let coords = x.coords();
        let zero = Complex64::new(0.0, 0.0);
        let out: Vec<Complex64> = match &self.kind {
            OperatorKind::Dense(m) => {
                let y = m.as_ref() * x.to_dvector();
                y.iter().copied().collect()
            }
            OperatorKind::Diagonal(d) => coords.iter().zip(d.iter()).map(|(x, d)| d * x).collect(),
            OperatorKind::BackwardShift(w) => (0..n)
                .map(|k| if k + 1 < n { w * coords[k + 1] } else { zero })
                .collect(),
            OperatorKind::ForwardShift(w) => (0..n)
                .map(|k| if k >= 1 { w * coords[k - 1] } else { zero })
                .collect(),
            OperatorKind::Scalar(a) => coords.iter().map(|x| a * x).collect(),
            OperatorKind::Composition(f, g) => return f.apply(&g.apply(x)),
            OperatorKind::DirectSum(parts) => {
                let mut out = Vec::with_capacity(n);
                let mut offset = 0;
                for part in parts.iter() {
                    let slice =
                        Vector::new(coords[offset..offset + part.dim].to_vec()).expect("nonempty");
                    out.extend_from_slice(part.apply(&slice).coords());
                    offset += part.dim;
                }
                out
            }
            OperatorKind::RankOneFix => {
                let mut out = vec![zero; n];
                out[0] = coords[0];
                out
            }
        };
        Vector::new(out).expect("operator produced non-finite output")
    }

    /// Apply the operator `n` times; `n = 0` returns `x` unchanged.
    pub fn power_apply(&self, n: u64, x: &Vector) -> Result<Vector, OperatorError> {
        if n > POWER_APPLY_BUDGET {
            return Err(OperatorError::BudgetExceeded {
                requested: n,
                budget: POWER_APPLY_BUDGET,
            });
        }
        let mut y = x.clone();
        for _ in 0..n {
            y = self.apply(&y);
        }
        Ok(y)
    }

    /// Operator 2-norm. Exact for structured variants; dense and mixed
    /// compositions fall back to power iteration on the Gram matrix, which
    /// reports a lower bound plus a residual-based error bound.
    pub fn norm_estimate(&self) -> Result<NormEstimate, OperatorError> {
        match &self.kind {
            OperatorKind::Scalar(a) => Ok(NormEstimate::exact(a.norm())),
            OperatorKind::Diagonal(d) => {
                Ok(NormEstimate::exact(d.iter().map(|c| c.norm()).fold(0.0, f64::max)))
            }
            OperatorKind::BackwardShift(w) | OperatorKind::ForwardShift(w) => {
                Ok(NormEstimate::exact(if self.dim >= 2 { w.norm() } else { 0.0 }))
            }
            OperatorKind::RankOneFix => Ok(NormEstimate::exact(1.0)),
            OperatorKind::DirectSum(parts) => {
                let mut value: f64 = 0.0;
                let mut upper: f64 = 0.0;
                for part in parts.iter() {
                    let est = part.norm_estimate()?;
                    value = value.max(est.value);
                    upper = upper.max(est.upper());
                }
                Ok(NormEstimate {
                    value,
                    error_bound: upper - value,
                })
            }
            // a scalar factor scales the norm of the other factor exactly
            OperatorKind::Composition(f, g) => {
                if let Some(a) = f.as_scalar() {
                    let inner = g.norm_estimate()?;
                    Ok(NormEstimate {
                        value: a.norm() * inner.value,
                        error_bound: a.norm() * inner.error_bound,
                    })
                } else if let Some(a) = g.as_scalar() {
                    let inner = f.norm_estimate()?;
                    Ok(NormEstimate {
                        value: a.norm() * inner.value,
                        error_bound: a.norm() * inner.error_bound,
                    })
                } else {
                    self.dense_norm_estimate()
                }
            }
            OperatorKind::Dense(_) => self.dense_norm_estimate(),
        }
    }

    fn dense_norm_estimate(&self) -> Result<NormEstimate, OperatorError> {
        let m = self.materialize()?;
        match linalg::spectral_norm(&m) {
            Ok(est) => Ok(NormEstimate {
                value: est.value,
                error_bound: est.error_bound,
            }),
            Err(stall) => Err(OperatorError::NonConvergence {
                iterations: stall.iterations,
            }),
        }
    }

    /// Dense matrix whose column `i` is `apply(e_i)`.
    pub fn materialize(&self) -> Result<DMatrix<Complex64>, OperatorError> {
        if self.dim > DENSE_DIM_CAP {
            return Err(OperatorError::DimensionCapExceeded {
                dim: self.dim,
                cap: DENSE_DIM_CAP,
            });
        }
        if let OperatorKind::Dense(m) = &self.kind {
            return Ok(m.as_ref().clone());
        }
        let n = self.dim;
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let col = self.apply(&Vector::basis(n, i));
            for (r, c) in col.coords().iter().enumerate() {
                out[(r, i)] = *c;
            }
        }
        Ok(out)
    }
}

/// Exactness window for finite truncations of sequence-space shifts.
///
/// Vectors supported in the first `support` coordinates reproduce the
/// untruncated result under up to `power` applications as long as nothing is
/// pushed past coordinate `dim`. Forward shifts advance the support by one
/// per application; backward shifts, diagonals, and scalars never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TruncationWindow {
    pub dim: usize,
    pub support: usize,
    pub power: u64,
}

impl TruncationWindow {
    /// How far one application moves support toward higher coordinates.
    /// `None` means the operator has no shift structure to reason about.
    fn forward_reach(op: &Operator) -> Option<u64> {
        match op.kind() {
            OperatorKind::Scalar(_)
            | OperatorKind::Diagonal(_)
            | OperatorKind::RankOneFix
            | OperatorKind::BackwardShift(_) => Some(0),
            OperatorKind::ForwardShift(_) => Some(1),
            OperatorKind::Composition(f, g) => {
                Some(Self::forward_reach(f)? + Self::forward_reach(g)?)
            }
            OperatorKind::Dense(_) | OperatorKind::DirectSum(_) => None,
        }
    }

    pub fn admits(&self, op: &Operator) -> Result<(), OperatorError> {
        if op.dim() != self.dim {
            return Err(OperatorError::DimensionMismatch {
                expected: self.dim,
                got: op.dim(),
            });
        }
        let reach = Self::forward_reach(op).ok_or_else(|| OperatorError::WindowViolation {
            reason: "exactness windows are only defined for shift-type operators".into(),
        })?;
        let needed = self.support as u64 + reach * self.power;
        if needed > self.dim as u64 {
            return Err(OperatorError::WindowViolation {
                reason: format!(
                    "support {} + reach {} x power {} exceeds dimension {}",
                    self.support, reach, self.power, self.dim
                ),
            });
        }
        Ok(())
    }
}
