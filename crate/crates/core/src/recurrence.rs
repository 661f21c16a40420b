//! Recurrence diagnostics for operator families: pointwise return residuals,
//! epsilon-recurrence, countable-intersection membership, exact ball-return
//! feasibility, set-recurrence certificates, and the nested-ball construction
//! of vectors with certified return bounds.
//!
//! Everything that searches a family is budget-relative: a negative answer
//! means "not within the first `N` members", never a claim about the whole
//! family. The exact feasibility solver works in the Euclidean norm; the
//! sup norm is accepted only by the residual-style reporting operations.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::operators::{Operator, OperatorError};
use crate::sets::{EnumerationBudget, OperatorSet, SetError};
use crate::space::{Ball, NormKind, SpaceError, Vector};

/// Absolute accuracy contract of [`ball_return_feasibility`].
pub const FEASIBILITY_ACCURACY: f64 = 1e-9;
/// Iteration cap for the boundary root-find.
const ROOT_FIND_MAX_ITERS: usize = 200;
/// Default certification margin, as a fraction of the ball radius.
pub const DEFAULT_MARGIN_FRACTION: f64 = 1e-6;
/// Default shrink factor for the nested-ball construction.
pub const DEFAULT_SHRINK: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RecurrenceError {
    #[error("the zero vector is excluded from recurrence queries")]
    ZeroVector,
    #[error("dimension mismatch: family acts on dim {set_dim}, vector has dim {vec_dim}")]
    DimensionMismatch { set_dim: usize, vec_dim: usize },
    #[error("the family has no members within the budget")]
    EmptyEnumeration,
    #[error("feasibility solve failed: {reason}")]
    SolverFailure { reason: String },
    #[error("construction step {step} found no admissible operator within budget {budget}")]
    StepFailed {
        step: usize,
        budget: u64,
        partial: Box<NestedBallTrace>,
    },
    #[error("margin must be finite and nonnegative, got {margin}")]
    BadMargin { margin: f64 },
    #[error("shrink factor must lie strictly between 0 and 1, got {shrink}")]
    BadShrink { shrink: f64 },
    #[error("initial ball radius must lie in (0, 1), got {radius}")]
    BadInitialRadius { radius: f64 },
    #[error("coverage distance must be finite and nonnegative, got {delta}")]
    BadDelta { delta: f64 },
    #[error("probe list must not be empty")]
    NoProbes,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A family member that nearly returns a vector: `||T_k x - x|| = residual`.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceWitness {
    pub op_index: u64,
    pub residual: f64,
    /// Set when the witness refers to a vector other than the query (for
    /// example after transport along a commuting map).
    pub point: Option<Vector>,
}

/// Proof that a ball returns to meet itself: the member at `op_index` maps
/// `z` (inside the ball) to within `value < radius` of the center.
#[derive(Debug, Clone, Serialize)]
pub struct SetRecurrenceCertificate {
    pub ball: Ball,
    pub op_index: u64,
    pub z: Vector,
    pub value: f64,
    pub margin: f64,
}

/// One refinement step of the nested-ball construction.
#[derive(Debug, Clone, Serialize)]
pub struct NestedBallStep {
    pub op_index: u64,
    pub center: Vector,
    pub radius: f64,
    /// `||T_k x_k - x_{k-1}||` reported by the feasibility solve.
    pub return_value: f64,
}

/// Outcome of [`construct_recurrent_vector`]: the chain of shrinking balls,
/// the limit point, and per-step residual bounds that were re-verified
/// against the final point.
#[derive(Debug, Clone, Serialize)]
pub struct NestedBallTrace {
    pub initial: Ball,
    pub steps: Vec<NestedBallStep>,
    pub point: Option<Vector>,
    /// `certified_bounds[k-1] = 2 r_{k-1} >= ||T_k y - y||`.
    pub certified_bounds: Vec<f64>,
    /// Independently recomputed `||T_k y - y||`.
    pub verified_residuals: Vec<f64>,
    /// The constructed point is the zero vector (legitimate geometry, but
    /// outside the usual nonzero-vector convention, so it is flagged).
    pub zero_point: bool,
}

/// Per-level outcome of [`gdelta_membership`].
#[derive(Debug, Clone, Serialize)]
pub struct GdeltaMembership {
    pub member: bool,
    /// Entry `s-1` holds the first witness with residual `< 1/s`, if any
    /// exists within the budget.
    pub per_s: Vec<Option<RecurrenceWitness>>,
}

/// Result of the exact ball-return solve.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityResult {
    /// `min { ||T z - c|| : ||z - c|| <= r }`, accurate to [`FEASIBILITY_ACCURACY`].
    pub value: f64,
    /// A feasible point attaining `value`.
    pub z: Vector,
    /// Lagrange multiplier of the ball constraint (0 when the unconstrained
    /// minimizer is already feasible).
    pub multiplier: f64,
}

fn check_query(set: &OperatorSet, x: &Vector) -> Result<(), RecurrenceError> {
    if set.dim() != x.dim() {
        return Err(RecurrenceError::DimensionMismatch {
            set_dim: set.dim(),
            vec_dim: x.dim(),
        });
    }
    if x.is_zero() {
        return Err(RecurrenceError::ZeroVector);
    }
    Ok(())
}

/// Smallest return residual `min_k ||T_k x - x||` over the enumerated family,
/// with ties broken toward the smallest index.
pub fn residual(
    set: &OperatorSet,
    x: &Vector,
    norm: NormKind,
    budget: EnumerationBudget,
) -> Result<RecurrenceWitness, RecurrenceError> {
    check_query(set, x)?;
    let mut best: Option<RecurrenceWitness> = None;
    for (op_index, t) in set.enumerate(budget) {
        let r = t.apply(x).sub(x).norm(norm);
        if best.as_ref().map_or(true, |b| r < b.residual) {
            best = Some(RecurrenceWitness {
                op_index,
                residual: r,
                point: None,
            });
        }
    }
    best.ok_or(RecurrenceError::EmptyEnumeration)
}

/// First member bringing `x` back within `eps`, or `None` within the budget.
pub fn is_eps_recurrent(
    set: &OperatorSet,
    x: &Vector,
    eps: f64,
    norm: NormKind,
    budget: EnumerationBudget,
) -> Result<Option<RecurrenceWitness>, RecurrenceError> {
    check_query(set, x)?;
    for (op_index, t) in set.enumerate(budget) {
        let r = t.apply(x).sub(x).norm(norm);
        if r < eps {
            return Ok(Some(RecurrenceWitness {
                op_index,
                residual: r,
                point: None,
            }));
        }
    }
    Ok(None)
}

/// Check `x` against every residual level `1/s` for `s = 1..=s_max` in one
/// enumeration pass. Membership at depth `s_max` is equivalent to
/// epsilon-recurrence at `eps = 1/s_max`, because witness levels are nested.
pub fn gdelta_membership(
    set: &OperatorSet,
    x: &Vector,
    s_max: u32,
    norm: NormKind,
    budget: EnumerationBudget,
) -> Result<GdeltaMembership, RecurrenceError> {
    check_query(set, x)?;
    let s_max = s_max.max(1) as usize;
    let mut per_s: Vec<Option<RecurrenceWitness>> = vec![None; s_max];
    let mut unfilled = s_max;
    for (op_index, t) in set.enumerate(budget) {
        let r = t.apply(x).sub(x).norm(norm);
        for s in 1..=s_max {
            if per_s[s - 1].is_none() && r < 1.0 / s as f64 {
                per_s[s - 1] = Some(RecurrenceWitness {
                    op_index,
                    residual: r,
                    point: None,
                });
                unfilled -= 1;
            }
        }
        if unfilled == 0 {
            break;
        }
    }
    let member = per_s.iter().all(|w| w.is_some());
    // nesting makes the deepest level decisive
    debug_assert_eq!(member, per_s[s_max - 1].is_some());
    Ok(GdeltaMembership { member, per_s })
}

/// Exact minimum of `||T z - c||_2` over the closed Euclidean ball
/// `||z - c|| <= r`, with a feasible point attaining it.
///
/// Substituting `z = c + w` turns this into the norm-constrained least
/// squares problem `min ||T w + g||` with `g = T c - c`. The unconstrained
/// minimum-norm solution is used when it is feasible; otherwise the
/// multiplier `mu > 0` in the shifted normal equations
/// `(T* T + mu I) w = -T* g` is located by a safeguarded Newton iteration on
/// the boundary equation `||w(mu)|| = r`, which is monotone in `mu`. Convex
/// least squares has no awkward degenerate case here: `||w(mu)||` decreases
/// continuously from the feasibility-violating minimum-norm solution, so a
/// root always exists in the bracket.
pub fn ball_return_feasibility(
    t: &Operator,
    b: &Ball,
) -> Result<FeasibilityResult, RecurrenceError> {
    if t.dim() != b.dim() {
        return Err(RecurrenceError::DimensionMismatch {
            set_dim: t.dim(),
            vec_dim: b.dim(),
        });
    }
    let m = t.materialize()?;
    let c = b.center().to_dvector();
    let g = &m * &c - &c;
    let r = b.radius();

    if r == 0.0 {
        return Ok(FeasibilityResult {
            value: g.norm(),
            z: b.center().clone(),
            multiplier: 0.0,
        });
    }

    // Unconstrained minimum-norm least squares solution of T w = -g.
    let w0 = linalg::min_norm_lsq(&m, &(-&g)).ok_or_else(|| RecurrenceError::SolverFailure {
        reason: "singular value decomposition failed".into(),
    })?;
    if w0.norm() <= r {
        let value = (&m * &w0 + &g).norm();
        let z = Vector::from_dvector(&(&c + &w0)).map_err(RecurrenceError::Space)?;
        return Ok(FeasibilityResult {
            value,
            z,
            multiplier: 0.0,
        });
    }

    // Boundary case: solve ||w(mu)|| = r with w(mu) = (A + mu I)^{-1} bvec.
    let a = m.ad_mul(&m);
    let bvec = -m.ad_mul(&g);
    let n = a.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let bnorm = bvec.norm();

    // ||w(mu)|| <= ||bvec|| / mu, so this always over-shrinks.
    let mut lo = 0.0_f64;
    let mut hi = (bnorm / r).max(f64::MIN_POSITIVE);
    let mut mu = hi.min(1.0 + bnorm / r / 2.0);
    let tol = r * 1e-11;
    let mut solution: Option<(f64, DVector<Complex64>)> = None;

    for _ in 0..ROOT_FIND_MAX_ITERS {
        let shifted = &a + &ident * Complex64::from(mu);
        let (w, qnorm_sq) = match Cholesky::new(shifted.clone()) {
            Some(chol) => {
                let w = chol.solve(&bvec);
                // q = L^{-1} w drives the Newton step
                let q = chol
                    .l()
                    .solve_lower_triangular(&w)
                    .unwrap_or_else(|| w.clone());
                let qn = q.norm_squared();
                (w, qn)
            }
            None => {
                let w = shifted
                    .clone()
                    .lu()
                    .solve(&bvec)
                    .ok_or_else(|| RecurrenceError::SolverFailure {
                        reason: format!("shifted normal equations singular at mu = {mu}"),
                    })?;
                let qn = w.norm_squared() / (mu + 1e-300);
                (w, qn)
            }
        };
        let nw = w.norm();
        if !nw.is_finite() {
            return Err(RecurrenceError::SolverFailure {
                reason: "non-finite iterate in boundary root-find".into(),
            });
        }
        if (nw - r).abs() <= tol {
            solution = Some((mu, w));
            break;
        }
        if nw > r {
            lo = mu;
        } else {
            hi = mu.min(hi);
        }
        // Newton step on 1/r - 1/||w||, safeguarded by the bracket.
        let mut next = mu + (nw * nw / qnorm_sq) * ((nw - r) / r);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        mu = next;
    }

    let (mu, mut w) = solution.ok_or_else(|| RecurrenceError::SolverFailure {
        reason: format!("boundary root-find did not converge in {ROOT_FIND_MAX_ITERS} iterations"),
    })?;
    // enforce feasibility exactly, then report the achieved value
    let nw = w.norm();
    if nw > r {
        w *= Complex64::from(r / nw);
    }
    let value = (&m * &w + &g).norm();
    let z = Vector::from_dvector(&(&c + &w)).map_err(RecurrenceError::Space)?;
    Ok(FeasibilityResult {
        value,
        z,
        multiplier: mu,
    })
}

/// Search each ball for the first family member whose return value clears
/// `radius - margin`, in enumeration order.
///
/// Per-ball solver failures are recorded without aborting the batch, and a
/// later member can still certify a ball whose earlier solve failed. `None`
/// always means "no certificate within this budget".
pub fn certify_recurrent_set(
    set: &OperatorSet,
    balls: &[Ball],
    budget: EnumerationBudget,
    margin: Option<f64>,
) -> Result<Vec<Result<Option<SetRecurrenceCertificate>, RecurrenceError>>, RecurrenceError> {
    if let Some(m) = margin {
        if !m.is_finite() || m < 0.0 {
            return Err(RecurrenceError::BadMargin { margin: m });
        }
    }
    for ball in balls {
        if ball.dim() != set.dim() {
            return Err(RecurrenceError::DimensionMismatch {
                set_dim: set.dim(),
                vec_dim: ball.dim(),
            });
        }
    }
    Ok(balls
        .par_iter()
        .map(|ball| certify_one_ball(set, ball, budget, margin))
        .collect())
}

fn certify_one_ball(
    set: &OperatorSet,
    ball: &Ball,
    budget: EnumerationBudget,
    margin: Option<f64>,
) -> Result<Option<SetRecurrenceCertificate>, RecurrenceError> {
    let margin = margin.unwrap_or(DEFAULT_MARGIN_FRACTION * ball.radius());
    let threshold = ball.radius() - margin;
    let mut first_failure: Option<RecurrenceError> = None;
    for (op_index, t) in set.enumerate(budget) {
        match ball_return_feasibility(&t, ball) {
            Ok(res) if res.value <= threshold => {
                debug_assert!(res.z.dist(ball.center(), NormKind::L2) <= ball.radius() * (1.0 + 1e-12));
                return Ok(Some(SetRecurrenceCertificate {
                    ball: ball.clone(),
                    op_index,
                    z: res.z,
                    value: res.value,
                    margin,
                }));
            }
            Ok(_) => {}
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(e);
                }
            }
        }
    }
    match first_failure {
        Some(e) => Err(e),
        None => Ok(None),
    }
}

/// Parameters for [`construct_recurrent_vector`].
#[derive(Debug, Clone, Copy)]
pub struct ConstructParams {
    /// Number of refinement steps `K`.
    pub steps: usize,
    /// Shrink factor `theta` in (0, 1); larger values keep more slack for
    /// the next step, smaller values converge faster.
    pub shrink: f64,
    pub budget: EnumerationBudget,
}

impl ConstructParams {
    pub fn new(steps: usize, budget: EnumerationBudget) -> Self {
        ConstructParams {
            steps,
            shrink: DEFAULT_SHRINK,
            budget,
        }
    }
}

/// Build a point `y` whose first `K` certified return residuals shrink
/// geometrically, by refining the starting ball through returning sub-balls.
///
/// Step `k` searches the family (in enumeration order) for a member `T_k`
/// whose return value on the shrunken ball `B(x_{k-1}, (1-theta) r_{k-1})`
/// is at most `(1-theta) r_{k-1}`; the attaining point becomes the next
/// center, and the next radius is clamped so that
/// `T_k(B(x_k, r_k))` stays inside `B(x_{k-1}, r_{k-1})` and `r_k <= 2^-k`.
/// The final center `y = x_K` then satisfies `||T_k y - y|| <= 2 r_{k-1}`
/// for every step; these bounds are re-verified before returning.
pub fn construct_recurrent_vector(
    set: &OperatorSet,
    ball: &Ball,
    params: ConstructParams,
) -> Result<NestedBallTrace, RecurrenceError> {
    if !(params.shrink > 0.0 && params.shrink < 1.0) {
        return Err(RecurrenceError::BadShrink {
            shrink: params.shrink,
        });
    }
    if !(ball.radius() > 0.0 && ball.radius() < 1.0) {
        return Err(RecurrenceError::BadInitialRadius {
            radius: ball.radius(),
        });
    }
    if ball.dim() != set.dim() {
        return Err(RecurrenceError::DimensionMismatch {
            set_dim: set.dim(),
            vec_dim: ball.dim(),
        });
    }
    let theta = params.shrink;
    let mut center = ball.center().clone();
    let mut radius = ball.radius();
    let mut steps: Vec<NestedBallStep> = Vec::with_capacity(params.steps);
    let mut chosen: Vec<Operator> = Vec::with_capacity(params.steps);

    for k in 1..=params.steps {
        let slack = (1.0 - theta) * radius;
        let shrunk = Ball::new(center.clone(), slack).map_err(RecurrenceError::Space)?;
        let mut accepted: Option<(u64, Operator, FeasibilityResult)> = None;
        for (op_index, t) in set.enumerate(params.budget) {
            let res = ball_return_feasibility(&t, &shrunk)?;
            if res.value <= slack {
                accepted = Some((op_index, t, res));
                break;
            }
        }
        let (op_index, t, res) = accepted.ok_or_else(|| RecurrenceError::StepFailed {
            step: k,
            budget: params.budget.max_index(),
            partial: Box::new(trace_so_far(ball, &steps)),
        })?;
        // the operator norm controls how much a sub-ball can spread under T_k
        let norm_upper = t.norm_estimate()?.upper().max(1.0);
        let next_radius = (0.5_f64.powi(k as i32))
            .min(theta * radius)
            .min(theta * (radius - res.value) / norm_upper);
        center = res.z.clone();
        radius = next_radius;
        steps.push(NestedBallStep {
            op_index,
            center: center.clone(),
            radius,
            return_value: res.value,
        });
        chosen.push(t);
    }

    let y = center;
    let mut certified_bounds = Vec::with_capacity(params.steps);
    let mut verified = Vec::with_capacity(params.steps);
    let mut prev_radius = ball.radius();
    for (step, t) in steps.iter().zip(&chosen) {
        let bound = 2.0 * prev_radius;
        let actual = t.apply(&y).sub(&y).norm(NormKind::L2);
        if actual > bound * (1.0 + 1e-9) {
            return Err(RecurrenceError::SolverFailure {
                reason: format!(
                    "certified bound violated at step {}: residual {actual} > {bound}",
                    step.op_index
                ),
            });
        }
        certified_bounds.push(bound);
        verified.push(actual);
        prev_radius = step.radius;
    }

    Ok(NestedBallTrace {
        initial: ball.clone(),
        zero_point: y.is_zero(),
        steps,
        point: Some(y),
        certified_bounds,
        verified_residuals: verified,
    })
}

fn trace_so_far(ball: &Ball, steps: &[NestedBallStep]) -> NestedBallTrace {
    NestedBallTrace {
        initial: ball.clone(),
        steps: steps.to_vec(),
        point: None,
        certified_bounds: Vec::new(),
        verified_residuals: Vec::new(),
        zero_point: false,
    }
}

/// Fraction of probe points lying within `delta` of some enumerated orbit
/// point `T_k x`.
pub fn orbit_covering_ratio(
    set: &OperatorSet,
    x: &Vector,
    probes: &[Vector],
    delta: f64,
    norm: NormKind,
    budget: EnumerationBudget,
) -> Result<f64, RecurrenceError> {
    if set.dim() != x.dim() {
        return Err(RecurrenceError::DimensionMismatch {
            set_dim: set.dim(),
            vec_dim: x.dim(),
        });
    }
    if !delta.is_finite() || delta < 0.0 {
        return Err(RecurrenceError::BadDelta { delta });
    }
    if probes.is_empty() {
        return Err(RecurrenceError::NoProbes);
    }
    for p in probes {
        if p.dim() != x.dim() {
            return Err(RecurrenceError::DimensionMismatch {
                set_dim: set.dim(),
                vec_dim: p.dim(),
            });
        }
    }
    let orbit: Vec<Vector> = set.enumerate(budget).map(|(_, t)| t.apply(x)).collect();
    if orbit.is_empty() {
        return Err(RecurrenceError::EmptyEnumeration);
    }
    let covered = probes
        .iter()
        .filter(|p| orbit.iter().any(|o| p.dist(o, norm) <= delta))
        .count();
    Ok(covered as f64 / probes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::ScalarSequence;
    use crate::space::Sampler;
    use approx::assert_relative_eq;

    fn cr(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_family(dim: usize) -> OperatorSet {
        OperatorSet::scalar_family(dim, ScalarSequence::OnePlusInverse).unwrap()
    }

    fn budget(n: u64) -> EnumerationBudget {
        EnumerationBudget::new(n).unwrap()
    }

    #[test]
    fn scalar_family_residual_is_inverse_budget() {
        let set = scalar_family(3);
        let x = Vector::basis(3, 0);
        let w = residual(&set, &x, NormKind::L2, budget(100)).unwrap();
        assert_eq!(w.op_index, 100);
        assert_relative_eq!(w.residual, 0.01, max_relative = 1e-14);
    }

    #[test]
    fn fixed_vector_has_zero_residual_at_first_index() {
        let set = OperatorSet::powers(Operator::rank_one_fix(4).unwrap(), 1).unwrap();
        let w = residual(&set, &Vector::basis(4, 0), NormKind::L2, budget(50)).unwrap();
        assert_eq!(w.op_index, 1);
        assert_eq!(w.residual, 0.0);
    }

    // Weighted backward shift, truncation dim 8: x = e1 + 2^-5 e6 returns to
    // within exactly 2^-5 at the fifth power, and no other power does better.
    #[test]
    fn shift_power_residual_is_exactly_one_thirty_second() {
        let b = Operator::backward_shift(8, cr(2.0)).unwrap();
        let set = OperatorSet::powers(b, 1).unwrap();
        let mut coords = vec![cr(0.0); 8];
        coords[0] = cr(1.0);
        coords[5] = cr(1.0 / 32.0);
        let x = Vector::new(coords).unwrap();
        let w = residual(&set, &x, NormKind::L2, budget(50)).unwrap();
        assert_eq!(w.op_index, 5);
        assert_eq!(w.residual, 0.03125);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let set = scalar_family(2);
        let z = Vector::zeros(2);
        assert!(matches!(
            residual(&set, &z, NormKind::L2, budget(5)),
            Err(RecurrenceError::ZeroVector)
        ));
    }

    #[test]
    fn residual_ties_break_to_the_smallest_index() {
        let set = OperatorSet::finite_list(vec![
            Operator::identity(2).unwrap(),
            Operator::identity(2).unwrap(),
        ])
        .unwrap();
        let w = residual(&set, &Vector::basis(2, 0), NormKind::L2, budget(2)).unwrap();
        assert_eq!(w.op_index, 1);
    }

    #[test]
    fn eps_recurrence_returns_the_first_qualifying_index() {
        let set = scalar_family(2);
        let x = Vector::basis(2, 1);
        let w = is_eps_recurrent(&set, &x, 0.1, NormKind::L2, budget(100))
            .unwrap()
            .expect("1/11 < 0.1");
        assert_eq!(w.op_index, 11);
        assert_relative_eq!(w.residual, 1.0 / 11.0, max_relative = 1e-14);
    }

    #[test]
    fn eps_recurrence_none_within_budget() {
        let set = OperatorSet::powers(Operator::rank_one_fix(4).unwrap(), 1).unwrap();
        // every power annihilates e2, so the residual is stuck at 1
        let got = is_eps_recurrent(&set, &Vector::basis(4, 1), 0.5, NormKind::L2, budget(50))
            .unwrap();
        assert!(got.is_none());
    }

    #[test]
    fn power_family_with_identity_start_witnesses_immediately() {
        let set = OperatorSet::powers(Operator::scalar(2, cr(3.0)).unwrap(), 0).unwrap();
        let w = is_eps_recurrent(&set, &Vector::basis(2, 0), 1e-9, NormKind::L2, budget(5))
            .unwrap()
            .expect("T^0 = I fixes everything");
        assert_eq!(w.op_index, 1);
        assert_eq!(w.residual, 0.0);
    }

    #[test]
    fn gdelta_membership_levels_fill_in_order() {
        let set = scalar_family(1);
        let x = Vector::basis(1, 0);
        let m = gdelta_membership(&set, &x, 10, NormKind::L2, budget(100)).unwrap();
        assert!(m.member);
        for s in 1..=10usize {
            let w = m.per_s[s - 1].as_ref().expect("level must be witnessed");
            assert!(w.residual < 1.0 / s as f64, "level {s}");
            // mathematically the first index with 1/n < 1/s is n = s+1;
            // rounding of 1 + 1/n can admit n = s itself, never earlier
            assert!(w.op_index == (s + 1) as u64 || w.op_index == s as u64, "level {s}");
        }
        for s in [1usize, 2, 4, 8] {
            // dyadic levels are exact, so the boundary index s is excluded
            assert_eq!(m.per_s[s - 1].as_ref().unwrap().op_index, (s + 1) as u64);
        }
    }

    #[test]
    fn gdelta_membership_fails_when_budget_is_too_small() {
        let set = scalar_family(1);
        let x = Vector::basis(1, 0);
        let m = gdelta_membership(&set, &x, 8, NormKind::L2, budget(4)).unwrap();
        assert!(!m.member);
        // residuals at indices 3 and 4 are 1/3-ish and exactly 1/4
        assert!(m.per_s[2].is_some());
        assert!(m.per_s[3].is_none(), "exactly 1/4 is not strictly below 1/4");
    }

    #[test]
    fn gdelta_matches_eps_recurrence_on_random_queries() {
        let mut s = Sampler::new(31, 0);
        for _ in 0..50 {
            let dim = s.uniform_usize(1, 5);
            let set = scalar_family(dim);
            let x = Vector::new((0..dim).map(|_| s.standard_complex()).collect()).unwrap();
            if x.is_zero() {
                continue;
            }
            let n = 10 + s.uniform_usize(0, 50) as u64;
            let m = gdelta_membership(&set, &x, 20, NormKind::L2, budget(n)).unwrap();
            let e = is_eps_recurrent(&set, &x, 1.0 / 20.0, NormKind::L2, budget(n)).unwrap();
            assert_eq!(m.member, e.is_some());
        }
    }

    #[test]
    fn feasibility_identity_returns_the_center() {
        let ball = Ball::new(Vector::from_real(&[0.4, -0.3]).unwrap(), 0.2).unwrap();
        let res = ball_return_feasibility(&Operator::identity(2).unwrap(), &ball).unwrap();
        assert!(res.value <= 1e-14);
        assert!(res.z.dist(ball.center(), NormKind::L2) <= 0.2);
    }

    #[test]
    fn feasibility_doubling_map_small_ball() {
        // min over ||z - e1|| <= 1/4 of ||2z - e1|| is attained at z = 3/4 e1
        let ball = Ball::new(Vector::basis(3, 0), 0.25).unwrap();
        let t = Operator::scalar(3, cr(2.0)).unwrap();
        let res = ball_return_feasibility(&t, &ball).unwrap();
        assert_relative_eq!(res.value, 0.5, epsilon = 1e-9);
        assert_relative_eq!(res.z.coords()[0].re, 0.75, epsilon = 1e-9);
        assert!(res.z.coords()[1..].iter().all(|c| c.norm() < 1e-9));
        assert!(res.multiplier > 0.0, "constraint must be active");
    }

    #[test]
    fn feasibility_rank_one_fix_away_from_its_fixed_line() {
        let ball = Ball::new(Vector::basis(4, 1), 0.5).unwrap();
        let t = Operator::rank_one_fix(4).unwrap();
        let res = ball_return_feasibility(&t, &ball).unwrap();
        assert_relative_eq!(res.value, 1.0, epsilon = 1e-9);
        // the minimizer zeroes its first coordinate
        assert!(res.z.coords()[0].norm() <= 1e-9);
    }

    #[test]
    fn feasibility_matches_scalar_closed_form() {
        let mut s = Sampler::new(17, 5);
        for _ in 0..200 {
            let dim = s.uniform_usize(1, 5);
            let alpha = s.standard_complex();
            let c = Vector::new((0..dim).map(|_| s.standard_complex()).collect()).unwrap();
            let r = 0.05 + s.uniform();
            let ball = Ball::new(c.clone(), r).unwrap();
            let t = Operator::scalar(dim, alpha).unwrap();
            let res = ball_return_feasibility(&t, &ball).unwrap();
            let cn = c.norm(NormKind::L2);
            let expect = ((alpha - cr(1.0)).norm() * cn - alpha.norm() * r).max(0.0);
            assert_relative_eq!(res.value, expect, epsilon = 1e-9, max_relative = 1e-7);
            assert!(res.z.dist(&c, NormKind::L2) <= r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn feasibility_value_zero_iff_return_point_inside() {
        // T = (1+s)I pulls c = e1 to c/(1+s); the minimum is exactly zero
        // precisely when that point is inside the ball
        let shift = 0.35;
        let t = Operator::scalar(2, cr(1.0 + shift)).unwrap();
        let dist = shift / (1.0 + shift);
        let inside = Ball::new(Vector::basis(2, 0), dist + 0.01).unwrap();
        let outside = Ball::new(Vector::basis(2, 0), dist - 0.01).unwrap();
        let res_in = ball_return_feasibility(&t, &inside).unwrap();
        let res_out = ball_return_feasibility(&t, &outside).unwrap();
        assert!(res_in.value <= 1e-10, "solvable case must reach zero");
        assert!(res_out.value > 1e-3, "unsolvable case must stay positive");
    }

    #[test]
    fn feasibility_zero_radius_ball() {
        let c = Vector::from_real(&[1.0, 2.0]).unwrap();
        let ball = Ball::new(c.clone(), 0.0).unwrap();
        let t = Operator::scalar(2, cr(2.0)).unwrap();
        let res = ball_return_feasibility(&t, &ball).unwrap();
        assert_relative_eq!(res.value, c.norm(NormKind::L2), max_relative = 1e-14);
        assert_eq!(res.z, c);
    }

    // Independent Monte Carlo oracle: the solver value can never exceed the
    // sampled minimum, and must come within the sampling gap of it.
    #[test]
    fn feasibility_beats_monte_carlo_sampling() {
        let mut s = Sampler::new(88, 2);
        for trial in 0..50 {
            // sampled minima converge like count^(-1/(2 dim)), so keep the
            // balls small and low-dimensional for a meaningful gap check
            let dim = s.uniform_usize(1, 2);
            let m = nalgebra::DMatrix::from_fn(dim, dim, |_, _| s.standard_complex());
            let t = Operator::dense(m).unwrap();
            let c = Vector::new((0..dim).map(|_| s.standard_complex()).collect()).unwrap();
            let r = 0.01 + 0.03 * s.uniform();
            let ball = Ball::new(c.clone(), r).unwrap();
            let res = ball_return_feasibility(&t, &ball).unwrap();

            let mut mc = f64::INFINITY;
            for _ in 0..30_000 {
                let z = crate::space::sample_in_ball(&ball, &mut s);
                mc = mc.min(t.apply(&z).sub(&c).norm(NormKind::L2));
            }
            assert!(
                res.value <= mc + FEASIBILITY_ACCURACY,
                "trial {trial}: solver {} above sampled min {mc}",
                res.value
            );
            assert!(
                mc - res.value <= 1e-2,
                "trial {trial}: sampling gap {} too large",
                mc - res.value
            );
        }
    }

    #[test]
    fn certify_scalar_family_ball() {
        let set = scalar_family(2);
        let ball = Ball::new(Vector::basis(2, 0), 0.3).unwrap();
        let outcome = certify_recurrent_set(&set, &[ball], budget(100), None).unwrap();
        let cert = outcome[0].as_ref().unwrap().as_ref().expect("certifiable");
        // n = 1 gives value 0.4, n = 2 gives 0.5 - 1.5 * 0.3 = 0.05
        assert_eq!(cert.op_index, 2);
        assert_relative_eq!(cert.value, 0.05, epsilon = 1e-9);
        assert!(cert.value < cert.ball.radius());
        assert!(cert.z.dist(cert.ball.center(), NormKind::L2) <= cert.ball.radius());
    }

    #[test]
    fn certify_reports_none_for_never_returning_ball() {
        let set = OperatorSet::powers(Operator::rank_one_fix(4).unwrap(), 1).unwrap();
        let ball = Ball::new(Vector::basis(4, 1), 0.5).unwrap();
        let outcome = certify_recurrent_set(&set, &[ball.clone()], budget(50), None).unwrap();
        assert!(outcome[0].as_ref().unwrap().is_none());
        // and indeed every power keeps the feasibility value pinned at 1
        for (_, t) in OperatorSet::powers(Operator::rank_one_fix(4).unwrap(), 1)
            .unwrap()
            .enumerate(budget(50))
        {
            let res = ball_return_feasibility(&t, &ball).unwrap();
            assert_relative_eq!(res.value, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn certify_processes_every_ball_in_order() {
        let set = scalar_family(1);
        let balls = vec![
            Ball::new(Vector::basis(1, 0), 0.4).unwrap(),
            Ball::new(Vector::from_real(&[2.0]).unwrap(), 0.1).unwrap(),
            Ball::new(Vector::from_real(&[-1.0]).unwrap(), 0.3).unwrap(),
        ];
        let outcome = certify_recurrent_set(&set, &balls, budget(200), None).unwrap();
        assert_eq!(outcome.len(), 3);
        for (i, o) in outcome.iter().enumerate() {
            let cert = o.as_ref().unwrap().as_ref().unwrap_or_else(|| panic!("ball {i}"));
            assert_eq!(cert.ball, balls[i]);
        }
    }

    #[test]
    fn construct_with_identity_family_stays_put() {
        let set = OperatorSet::finite_list(vec![Operator::identity(2).unwrap()]).unwrap();
        let ball = Ball::new(Vector::basis(2, 0), 0.5).unwrap();
        let trace =
            construct_recurrent_vector(&set, &ball, ConstructParams::new(3, budget(1))).unwrap();
        let y = trace.point.as_ref().unwrap();
        assert_eq!(y, ball.center());
        for (k, step) in trace.steps.iter().enumerate() {
            assert_eq!(step.op_index, 1);
            assert!(step.radius <= 0.5_f64.powi(k as i32 + 1) + 1e-15);
        }
        for (bound, actual) in trace.certified_bounds.iter().zip(&trace.verified_residuals) {
            assert!(actual <= bound);
            assert_eq!(*actual, 0.0);
        }
    }

    #[test]
    fn construct_with_rotation_powers_uses_the_full_period() {
        let rot = Operator::scalar(1, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4))
            .unwrap();
        let set = OperatorSet::powers(rot, 1).unwrap();
        let ball = Ball::new(Vector::from_real(&[1.0]).unwrap(), 0.5).unwrap();
        let trace =
            construct_recurrent_vector(&set, &ball, ConstructParams::new(4, budget(16))).unwrap();
        for step in &trace.steps {
            assert_eq!(step.op_index, 8, "only the full rotation returns");
        }
        let y = trace.point.as_ref().unwrap();
        assert!(y.dist(ball.center(), NormKind::L2) <= ball.radius());
        for r in &trace.verified_residuals {
            assert!(*r <= 1e-12, "exact returns leave no residual, got {r}");
        }
    }

    #[test]
    fn construct_traces_nest_and_respect_bounds() {
        let set = scalar_family(2);
        let ball = Ball::new(Vector::basis(2, 0), 0.4).unwrap();
        let trace =
            construct_recurrent_vector(&set, &ball, ConstructParams::new(5, budget(5000)))
                .unwrap();
        let mut prev_center = ball.center().clone();
        let mut prev_radius = ball.radius();
        for (k, step) in trace.steps.iter().enumerate() {
            let k = k + 1;
            assert!(step.radius <= 0.5_f64.powi(k as i32) + 1e-15, "r_k <= 2^-k");
            let gap = step.center.dist(&prev_center, NormKind::L2);
            assert!(
                gap + step.radius <= prev_radius * (1.0 + 1e-9),
                "step {k} breaks nesting: {gap} + {} > {prev_radius}",
                step.radius
            );
            prev_center = step.center.clone();
            prev_radius = step.radius;
        }
        let y = trace.point.as_ref().unwrap();
        for (bound, actual) in trace.certified_bounds.iter().zip(&trace.verified_residuals) {
            assert!(actual <= &(bound * (1.0 + 1e-9)));
        }
        assert!(y.dist(ball.center(), NormKind::L2) <= ball.radius());
    }

    #[test]
    fn construct_fails_cleanly_when_nothing_returns() {
        let set = OperatorSet::finite_list(vec![Operator::scalar(1, cr(2.0)).unwrap()]).unwrap();
        let ball = Ball::new(Vector::from_real(&[1.0]).unwrap(), 0.5).unwrap();
        let err = construct_recurrent_vector(&set, &ball, ConstructParams::new(2, budget(1)))
            .unwrap_err();
        match err {
            RecurrenceError::StepFailed { step, partial, .. } => {
                assert_eq!(step, 1);
                assert!(partial.steps.is_empty());
                assert!(partial.point.is_none());
            }
            other => panic!("expected StepFailed, got {other:?}"),
        }
    }

    #[test]
    fn construct_rejects_wide_or_degenerate_balls() {
        let set = scalar_family(1);
        let too_wide = Ball::new(Vector::basis(1, 0), 1.0).unwrap();
        assert!(matches!(
            construct_recurrent_vector(&set, &too_wide, ConstructParams::new(2, budget(10))),
            Err(RecurrenceError::BadInitialRadius { .. })
        ));
        let degenerate = Ball::new(Vector::basis(1, 0), 0.0).unwrap();
        assert!(construct_recurrent_vector(&set, &degenerate, ConstructParams::new(2, budget(10)))
            .is_err());
    }

    #[test]
    fn orbit_ratio_full_when_residual_beats_delta() {
        let set = scalar_family(2);
        let x = Vector::basis(2, 0);
        // orbit point (1 + 1/n) x comes within 1/n of x
        let ratio =
            orbit_covering_ratio(&set, &x, &[x.clone()], 0.05, NormKind::L2, budget(100)).unwrap();
        assert_eq!(ratio, 1.0);
    }

    #[test]
    fn orbit_ratio_zero_for_faraway_probe() {
        let set = scalar_family(2);
        let x = Vector::basis(2, 0);
        let probe = Vector::basis(2, 1);
        let ratio =
            orbit_covering_ratio(&set, &x, &[probe], 0.1, NormKind::L2, budget(100)).unwrap();
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn sup_norm_residual_reporting_works() {
        let set = scalar_family(2);
        let x = Vector::from_real(&[1.0, 2.0]).unwrap();
        let w = residual(&set, &x, NormKind::LInf, budget(10)).unwrap();
        // sup norm of (1/10)(1, 2) is 0.2
        assert_relative_eq!(w.residual, 0.2, max_relative = 1e-14);
    }
}
