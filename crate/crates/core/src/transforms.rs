//! Witness transfer along structure-preserving maps: operators in the
//! commutant, intertwining maps between paired families, direct-sum
//! projections, and unimodular rescalings of product-closed families.
//!
//! Set-level statements ("the image of every near-returning vector nearly
//! returns") are realized here at witness level: each transfer recomputes the
//! residual at the transported point and checks it against an explicit bound,
//! so a returned witness is always self-certifying.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::operators::{NormEstimate, Operator, OperatorError};
use crate::recurrence::{is_eps_recurrent, RecurrenceError, RecurrenceWitness};
use crate::sets::{EnumerationBudget, OperatorSet, PairingMode, ScalarSequence, SetError, SetKind};
use crate::space::{NormKind, SpaceError, Vector};

/// Row-rank gate for intertwiner matrices, relative to the largest singular
/// value. A map failing this has (numerically) deficient range and cannot
/// transport witnesses onto the whole target space.
pub const ROW_RANK_RTOL: f64 = 1e-10;
/// Slack added to every transfer bound before it is enforced, absorbing
/// round-off in the recomputed residual.
pub const TRANSFER_SLACK: f64 = 1e-9;
/// Default budget multiplier for the scaled-family search: composed elements
/// return at composite indices, so the second search must look further.
pub const DEFAULT_ENLARGEMENT: u64 = 10;
/// How many leading members participate in the pairwise closure check.
const CLOSURE_PROBE: usize = 8;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("map is not full row rank: smallest singular value {smallest:.3e} vs largest {largest:.3e}")]
    NotFullRowRank { smallest: f64, largest: f64 },
    #[error("operator does not commute with the witness member: defect {defect:.3e} > tol {tol:.3e}")]
    NotCommuting { defect: f64, tol: f64 },
    #[error("transported vector is zero; zero vectors carry no recurrence witness")]
    ZeroImage,
    #[error("paired members fail to intertwine at index {op_index}: defect {defect:.3e} > tol {tol:.3e}")]
    PairingDefect { op_index: u64, defect: f64, tol: f64 },
    #[error("pairing has no target for index {op_index}")]
    MissingPairing { op_index: u64 },
    #[error("witness index {op_index} is outside the family")]
    UnknownIndex { op_index: u64 },
    #[error("recomputed residual {actual:.6e} exceeds the transfer bound {bound:.6e}")]
    BoundViolated { actual: f64, bound: f64 },
    #[error("family is not a direct sum, so the witness cannot be split")]
    NotDecomposable,
    #[error(
        "family is not closed under composition within the scan budget: \
         member {index_a} . member {index_b} was not re-found"
    )]
    NotProductClosed { index_a: u64, index_b: u64 },
    #[error("scaling sequence is not multiplicative at indices ({index_a}, {index_b}): defect {defect:.3e}")]
    NotMultiplicative { index_a: u64, index_b: u64, defect: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Recurrence(#[from] RecurrenceError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Assignment of target-family indices to source-family indices.
#[derive(Debug, Clone)]
pub enum IndexPairing {
    /// Index `k` pairs with index `k` (conjugated or identically-indexed families).
    Identity,
    /// `targets[k-1]` is the target index paired with source index `k`.
    Explicit(Arc<Vec<u64>>),
}

impl IndexPairing {
    pub fn target(&self, source_index: u64) -> Option<u64> {
        match self {
            IndexPairing::Identity => Some(source_index),
            IndexPairing::Explicit(map) => {
                map.get(usize::try_from(source_index.checked_sub(1)?).ok()?).copied()
            }
        }
    }
}

/// A linear map carrying one family's vectors to another's, together with the
/// index pairing that matches up the two enumerations.
///
/// The matrix may be rectangular (target dim × source dim) but must have full
/// row rank within [`ROW_RANK_RTOL`]: that is the finite-dimensional stand-in
/// for dense range.
#[derive(Debug, Clone)]
pub struct IntertwinerMap {
    matrix: DMatrix<Complex64>,
    pairing: IndexPairing,
}

impl IntertwinerMap {
    pub fn new(matrix: DMatrix<Complex64>, pairing: IndexPairing) -> Result<Self, TransformError> {
        if matrix.is_empty() {
            return Err(TransformError::DimensionMismatch { expected: 1, got: 0 });
        }
        if matrix.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(TransformError::Operator(OperatorError::NonFinite));
        }
        let svals = linalg::singular_values(&matrix);
        let largest = svals.first().copied().unwrap_or(0.0);
        // full row rank needs `rows` nonzero singular values
        let smallest = if matrix.nrows() <= matrix.ncols() {
            svals.get(matrix.nrows() - 1).copied().unwrap_or(0.0)
        } else {
            0.0
        };
        if smallest < ROW_RANK_RTOL * largest || largest == 0.0 {
            return Err(TransformError::NotFullRowRank { smallest, largest });
        }
        Ok(IntertwinerMap { matrix, pairing })
    }

    pub fn identity(dim: usize) -> Self {
        IntertwinerMap {
            matrix: DMatrix::identity(dim, dim),
            pairing: IndexPairing::Identity,
        }
    }

    /// Square map taken from an existing operator (must stay full rank).
    pub fn from_operator(op: &Operator, pairing: IndexPairing) -> Result<Self, TransformError> {
        IntertwinerMap::new(op.materialize()?, pairing)
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn pairing(&self) -> &IndexPairing {
        &self.pairing
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, TransformError> {
        if x.dim() != self.source_dim() {
            return Err(TransformError::DimensionMismatch {
                expected: self.source_dim(),
                got: x.dim(),
            });
        }
        let y = &self.matrix * x.to_dvector();
        Vector::from_dvector(&y).map_err(TransformError::Space)
    }

    /// Upper bound on the operator 2-norm of the map.
    pub fn norm_upper(&self) -> Result<f64, TransformError> {
        let est = linalg::spectral_norm(&self.matrix)
            .map_err(|stall| OperatorError::NonConvergence { iterations: stall.iterations })?;
        Ok(est.value + est.error_bound)
    }
}

/// Operator 2-norm estimate of `S phi - phi T`, the failure of `phi` to
/// intertwine `T` (on the source space) with `S` (on the target space).
pub fn intertwining_defect(
    phi: &IntertwinerMap,
    t: &Operator,
    s: &Operator,
) -> Result<NormEstimate, TransformError> {
    if t.dim() != phi.source_dim() {
        return Err(TransformError::DimensionMismatch {
            expected: phi.source_dim(),
            got: t.dim(),
        });
    }
    if s.dim() != phi.target_dim() {
        return Err(TransformError::DimensionMismatch {
            expected: phi.target_dim(),
            got: s.dim(),
        });
    }
    let defect = s.materialize()? * &phi.matrix - &phi.matrix * t.materialize()?;
    let est = linalg::spectral_norm(&defect)
        .map_err(|stall| OperatorError::NonConvergence { iterations: stall.iterations })?;
    Ok(NormEstimate {
        value: est.value,
        error_bound: est.error_bound,
    })
}

/// A witness carried to a new point, with the bound its recomputed residual
/// was checked against.
#[derive(Debug, Clone, Serialize)]
pub struct TransferredWitness {
    pub point: Vector,
    pub witness: RecurrenceWitness,
    pub bound: f64,
}

/// Transport a witness at `x` to one at `S x`, for `S` commuting with the
/// witness member `T_k` (up to `tol`).
///
/// Exact commutation gives `T_k(Sx) - Sx = S(T_k x - x)`, so the residual at
/// `Sx` is at most `||S||` times the residual at `x`; a commutation defect
/// adds `defect * ||x||`. The returned witness carries the recomputed
/// residual, which is checked against that bound.
pub fn commutant_pushforward(
    set: &OperatorSet,
    s: &Operator,
    x: &Vector,
    witness: &RecurrenceWitness,
    tol: f64,
) -> Result<TransferredWitness, TransformError> {
    if s.dim() != set.dim() {
        return Err(TransformError::DimensionMismatch {
            expected: set.dim(),
            got: s.dim(),
        });
    }
    let t = set
        .member_at(witness.op_index)
        .ok_or(TransformError::UnknownIndex { op_index: witness.op_index })?;
    let t_mat = t.materialize()?;
    let s_mat = s.materialize()?;
    let comm = &t_mat * &s_mat - &s_mat * &t_mat;
    let defect_est = linalg::spectral_norm(&comm)
        .map_err(|stall| OperatorError::NonConvergence { iterations: stall.iterations })?;
    let defect = defect_est.value + defect_est.error_bound;
    if defect > tol {
        return Err(TransformError::NotCommuting { defect, tol });
    }
    let sx = s.apply(x);
    if sx.is_zero() {
        return Err(TransformError::ZeroImage);
    }
    let s_norm = s.norm_estimate()?.upper();
    let bound = s_norm * witness.residual + defect * x.norm(NormKind::L2) + TRANSFER_SLACK;
    let actual = t.apply(&sx).sub(&sx).norm(NormKind::L2);
    if actual > bound {
        return Err(TransformError::BoundViolated { actual, bound });
    }
    Ok(TransferredWitness {
        witness: RecurrenceWitness {
            op_index: witness.op_index,
            residual: actual,
            point: Some(sx.clone()),
        },
        point: sx,
        bound,
    })
}

/// Transport a witness at `x` under the source family to one at `phi x`
/// under the target family, using the map's index pairing.
///
/// With per-pair intertwining defect `d_k = ||S_k phi - phi T_k||`, the
/// residual at `phi x` is at most `||phi|| res + d_k ||x||`; defects above
/// `tol` are rejected rather than silently degrading the bound.
pub fn pushforward_witness(
    phi: &IntertwinerMap,
    source: &OperatorSet,
    target: &OperatorSet,
    x: &Vector,
    witness: &RecurrenceWitness,
    tol: f64,
) -> Result<TransferredWitness, TransformError> {
    if source.dim() != phi.source_dim() {
        return Err(TransformError::DimensionMismatch {
            expected: phi.source_dim(),
            got: source.dim(),
        });
    }
    if target.dim() != phi.target_dim() {
        return Err(TransformError::DimensionMismatch {
            expected: phi.target_dim(),
            got: target.dim(),
        });
    }
    let k = witness.op_index;
    let j = phi
        .pairing()
        .target(k)
        .ok_or(TransformError::MissingPairing { op_index: k })?;
    let t = source
        .member_at(k)
        .ok_or(TransformError::UnknownIndex { op_index: k })?;
    let s = target
        .member_at(j)
        .ok_or(TransformError::UnknownIndex { op_index: j })?;
    let defect_est = intertwining_defect(phi, &t, &s)?;
    let defect = defect_est.upper();
    if defect > tol {
        return Err(TransformError::PairingDefect { op_index: k, defect, tol });
    }
    let px = phi.apply(x)?;
    if px.is_zero() {
        return Err(TransformError::ZeroImage);
    }
    let bound =
        phi.norm_upper()? * witness.residual + defect * x.norm(NormKind::L2) + TRANSFER_SLACK;
    let actual = s.apply(&px).sub(&px).norm(NormKind::L2);
    if actual > bound {
        return Err(TransformError::BoundViolated { actual, bound });
    }
    Ok(TransferredWitness {
        witness: RecurrenceWitness {
            op_index: j,
            residual: actual,
            point: Some(px.clone()),
        },
        point: px,
        bound,
    })
}

/// One component of a split direct-sum witness.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentWitness {
    /// Position of the part in the direct sum (0-based).
    pub part: usize,
    /// Witness for the part family; absent when the component vector is zero.
    pub witness: Option<RecurrenceWitness>,
    pub component: Vector,
    pub residual: f64,
    pub zero_component: bool,
}

/// Split a witness for a direct-sum family into per-part witnesses.
///
/// Because the member acts blockwise, each component residual is dominated by
/// the total and the Euclidean residuals satisfy the Pythagorean identity
/// `sum res_i^2 = res_total^2`, which is re-verified here. Components holding
/// the zero vector are flagged instead of being reported as witnesses.
pub fn project_direct_sum_witness(
    set: &OperatorSet,
    x: &Vector,
    witness: &RecurrenceWitness,
) -> Result<Vec<ComponentWitness>, TransformError> {
    let (parts, mode) = match set.kind() {
        SetKind::DirectSumSet { parts, mode } => (parts.as_ref(), *mode),
        _ => return Err(TransformError::NotDecomposable),
    };
    if x.dim() != set.dim() {
        return Err(TransformError::DimensionMismatch {
            expected: set.dim(),
            got: x.dim(),
        });
    }
    let k = witness.op_index;
    let total_op = set
        .member_at(k)
        .ok_or(TransformError::UnknownIndex { op_index: k })?;
    let res_total = total_op.apply(x).sub(x).norm(NormKind::L2);

    // per-part member indices: shared in diagonal mode, mixed-radix digits
    // (first part fastest) in product mode
    let part_indices: Vec<u64> = match mode {
        PairingMode::Diagonal => vec![k; parts.len()],
        PairingMode::FullProduct => {
            let mut rem = k - 1;
            parts
                .iter()
                .map(|p| {
                    let len = p.len_bound().expect("product mode requires finite parts");
                    let digit = rem % len;
                    rem /= len;
                    digit + 1
                })
                .collect()
        }
    };

    let coords = x.coords();
    let mut offset = 0usize;
    let mut out = Vec::with_capacity(parts.len());
    let mut sq_sum = 0.0_f64;
    for (i, (part, &idx)) in parts.iter().zip(&part_indices).enumerate() {
        let dim = part.dim();
        let slice = coords[offset..offset + dim].to_vec();
        offset += dim;
        let op = part
            .member_at(idx)
            .ok_or(TransformError::UnknownIndex { op_index: idx })?;
        // a zero component has zero residual but carries no witness
        let is_zero = slice.iter().all(|c| c.norm_sqr() == 0.0);
        let (component, residual) = if is_zero {
            (Vector::zeros(dim), 0.0)
        } else {
            let component = Vector::new(slice).map_err(TransformError::Space)?;
            let residual = op.apply(&component).sub(&component).norm(NormKind::L2);
            (component, residual)
        };
        sq_sum += residual * residual;
        out.push(ComponentWitness {
            part: i,
            witness: (!is_zero).then(|| RecurrenceWitness {
                op_index: idx,
                residual,
                point: Some(component.clone()),
            }),
            component,
            residual,
            zero_component: is_zero,
        });
    }

    let gap = (sq_sum - res_total * res_total).abs();
    if gap > 1e-12 * (1.0 + res_total * res_total) {
        return Err(TransformError::BoundViolated {
            actual: sq_sum,
            bound: res_total * res_total,
        });
    }
    for c in &out {
        if c.residual > res_total * (1.0 + 1e-12) {
            return Err(TransformError::BoundViolated {
                actual: c.residual,
                bound: res_total,
            });
        }
    }
    Ok(out)
}

/// Outcome of the unimodular-rescaling experiment: witness searches for the
/// same vector under the family and under its scaled copy.
#[derive(Debug, Clone, Serialize)]
pub struct UnimodularTransferReport {
    pub base_witness: Option<RecurrenceWitness>,
    pub scaled_witness: Option<RecurrenceWitness>,
    pub base_budget: u64,
    pub scaled_budget: u64,
    /// Both searches found a witness, or neither did. Negative answers are
    /// budget-relative, so disagreement suggests a too-small budget rather
    /// than a genuine counterexample.
    pub agree: bool,
}

/// Compare epsilon-recurrence of `x` under a product-closed family and under
/// its unimodular rescaling `{lambda_k T_k}`.
///
/// Preconditions checked: pairwise products of the leading members re-appear
/// in the (enlarged) enumeration, and the scaling sequence is multiplicative
/// over index addition, `lambda_{j+k} = lambda_j lambda_k` (exact for phase
/// sequences; explicit lists are checked on their finite support). The scaled
/// search runs with `budget * enlargement` because returns of the scaled
/// family live at composite indices.
///
/// This is an experiment, not a decision procedure: both answers are
/// budget-relative.
pub fn unimodular_transfer_check(
    set: &OperatorSet,
    lambda: &ScalarSequence,
    x: &Vector,
    eps: f64,
    budget: EnumerationBudget,
    enlargement: u64,
) -> Result<UnimodularTransferReport, TransformError> {
    let scan_budget = budget.scaled(enlargement.max(1));
    validate_product_closure(set, budget, scan_budget)?;
    validate_multiplicative(lambda)?;

    let base_witness = is_eps_recurrent(set, x, eps, NormKind::L2, budget)?;
    let scaled_set = OperatorSet::unimodular_scaled(set.clone(), lambda.clone())?;
    let scaled_witness = is_eps_recurrent(&scaled_set, x, eps, NormKind::L2, scan_budget)?;
    let agree = base_witness.is_some() == scaled_witness.is_some();
    Ok(UnimodularTransferReport {
        base_witness,
        scaled_witness,
        base_budget: budget.max_index(),
        scaled_budget: scan_budget.max_index(),
        agree,
    })
}

fn validate_product_closure(
    set: &OperatorSet,
    budget: EnumerationBudget,
    scan_budget: EnumerationBudget,
) -> Result<(), TransformError> {
    let probe: Vec<(u64, DMatrix<Complex64>)> = set
        .enumerate(budget)
        .take(CLOSURE_PROBE)
        .map(|(i, t)| t.materialize().map(|m| (i, m)))
        .collect::<Result<_, _>>()?;
    let scan: Vec<DMatrix<Complex64>> = set
        .enumerate(scan_budget)
        .map(|(_, t)| t.materialize())
        .collect::<Result<_, _>>()?;
    for (i, ti) in &probe {
        for (j, tj) in &probe {
            let prod = ti * tj;
            let scale = prod.norm().max(1.0);
            let refound = scan.iter().any(|q| (&prod - q).norm() <= 1e-9 * scale);
            if !refound {
                return Err(TransformError::NotProductClosed { index_a: *i, index_b: *j });
            }
        }
    }
    Ok(())
}

fn validate_multiplicative(lambda: &ScalarSequence) -> Result<(), TransformError> {
    for j in 1..=CLOSURE_PROBE as u64 {
        for k in 1..=CLOSURE_PROBE as u64 {
            let (lj, lk, ljk) = match (lambda.value(j), lambda.value(k), lambda.value(j + k)) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                // finite lists cannot be checked beyond their support
                _ => continue,
            };
            let defect = (ljk - lj * lk).norm();
            if defect > 1e-9 {
                return Err(TransformError::NotMultiplicative { index_a: j, index_b: k, defect });
            }
        }
    }
    Ok(())
}
