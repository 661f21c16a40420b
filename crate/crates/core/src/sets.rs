//! Indexed operator families and their deterministic enumeration.
//!
//! A set is an abstract family `T_1, T_2, ...`; [`OperatorSet::enumerate`]
//! walks it in index order up to a budget. Enumeration is a pure function of
//! the index: the same set and budget always produce the same operators in
//! the same order, which is what makes budget-relative negative results
//! meaningful.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::operators::{Operator, OperatorError};

/// `|lambda| - 1` tolerance for unimodular scaling families.
pub const UNIMODULAR_TOL: f64 = 1e-12;
/// `||phi phi_inv - I||` tolerance for conjugation families.
pub const INVERSE_DEFECT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("operator family must not be empty")]
    EmptyList,
    #[error("enumeration budget must be at least 1")]
    ZeroBudget,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("scaling coefficient at index {index} has modulus {modulus}, expected 1")]
    NotUnimodular { index: u64, modulus: f64 },
    #[error("conjugation map is not invertible: ||phi phi_inv - I|| = {defect:.3e}")]
    NotInvertible { defect: f64 },
    #[error("full-product pairing requires every part to be a finite list")]
    FullProductNeedsFiniteLists,
    #[error("sequence parameter must be finite")]
    NonFiniteParameter,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// How many indices an enumeration may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct EnumerationBudget {
    max_index: u64,
}

impl EnumerationBudget {
    pub fn new(max_index: u64) -> Result<Self, SetError> {
        if max_index == 0 {
            return Err(SetError::ZeroBudget);
        }
        Ok(EnumerationBudget { max_index })
    }

    pub fn max_index(&self) -> u64 {
        self.max_index
    }

    /// Budget scaled by a factor, saturating instead of overflowing.
    pub fn scaled(&self, factor: u64) -> Self {
        EnumerationBudget {
            max_index: self.max_index.saturating_mul(factor.max(1)),
        }
    }
}

/// Closed-form scalar sequence, evaluated on demand at 1-based indices.
#[derive(Debug, Clone)]
pub enum ScalarSequence {
    /// `a_n = 1 + 1/n`: converges to the identity coefficient from above.
    OnePlusInverse,
    /// `lambda_n = exp(i n theta)`: unimodular rotation phases.
    UnimodularPhase { theta: f64 },
    /// Explicit finite coefficient list (index 1 is the first entry).
    ExplicitList(Arc<Vec<Complex64>>),
}

impl ScalarSequence {
    pub fn explicit(values: Vec<Complex64>) -> Result<Self, SetError> {
        if values.is_empty() {
            return Err(SetError::EmptyList);
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(SetError::NonFiniteParameter);
        }
        Ok(ScalarSequence::ExplicitList(Arc::new(values)))
    }

    pub fn unimodular_phase(theta: f64) -> Result<Self, SetError> {
        if !theta.is_finite() {
            return Err(SetError::NonFiniteParameter);
        }
        Ok(ScalarSequence::UnimodularPhase { theta })
    }

    /// Value at 1-based `index`, or `None` past the end of a finite list.
    pub fn value(&self, index: u64) -> Option<Complex64> {
        debug_assert!(index >= 1);
        match self {
            ScalarSequence::OnePlusInverse => {
                Some(Complex64::new(1.0 + 1.0 / index as f64, 0.0))
            }
            ScalarSequence::UnimodularPhase { theta } => {
                Some(Complex64::from_polar(1.0, index as f64 * theta))
            }
            ScalarSequence::ExplicitList(values) => {
                values.get((index - 1) as usize).copied()
            }
        }
    }

    /// Number of terms, or `None` when unbounded.
    pub fn len(&self) -> Option<u64> {
        match self {
            ScalarSequence::ExplicitList(values) => Some(values.len() as u64),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    fn check_unimodular(&self) -> Result<(), SetError> {
        match self {
            ScalarSequence::UnimodularPhase { .. } => Ok(()),
            ScalarSequence::OnePlusInverse => Err(SetError::NotUnimodular {
                index: 1,
                modulus: 2.0,
            }),
            ScalarSequence::ExplicitList(values) => {
                for (i, v) in values.iter().enumerate() {
                    let modulus = v.norm();
                    if (modulus - 1.0).abs() > UNIMODULAR_TOL {
                        return Err(SetError::NotUnimodular {
                            index: i as u64 + 1,
                            modulus,
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// Pairing rule for direct sums of families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// Index `k` pairs the `k`-th member of every part: `T_k^(1) + T_k^(2) + ...`.
    Diagonal,
    /// Mixed-radix walk over the full product (finite parts only); the first
    /// part varies fastest.
    FullProduct,
}

#[derive(Debug, Clone)]
pub enum SetKind {
    FiniteList(Arc<Vec<Operator>>),
    Powers { base: Arc<Operator>, start: u64 },
    ScalarFamily { seq: ScalarSequence },
    UnimodularScaled { base: Arc<OperatorSet>, phases: ScalarSequence },
    DirectSumSet { parts: Arc<Vec<OperatorSet>>, mode: PairingMode },
    ConjugateSet {
        base: Arc<OperatorSet>,
        phi: Arc<Operator>,
        phi_inv: Arc<Operator>,
    },
    /// Snapshots of a one-parameter operator family on a finite grid of
    /// complex parameters (see [`crate::groups`]).
    GroupGrid {
        ops: Arc<Vec<Operator>>,
        points: Arc<Vec<Complex64>>,
    },
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    kind: SetKind,
    dim: usize,
}

impl OperatorSet {
    pub fn finite_list(ops: Vec<Operator>) -> Result<Self, SetError> {
        let dim = ops.first().ok_or(SetError::EmptyList)?.dim();
        for op in &ops {
            if op.dim() != dim {
                return Err(SetError::DimensionMismatch {
                    expected: dim,
                    got: op.dim(),
                });
            }
        }
        Ok(OperatorSet {
            dim,
            kind: SetKind::FiniteList(Arc::new(ops)),
        })
    }

    /// Powers `T^n` for `n = start, start+1, ...` at indices `1, 2, ...`.
    /// `start = 0` prepends the identity; the conventional family begins at
    /// the first power (`start = 1`).
    pub fn powers(base: Operator, start: u64) -> Result<Self, SetError> {
        Ok(OperatorSet {
            dim: base.dim(),
            kind: SetKind::Powers {
                base: Arc::new(base),
                start,
            },
        })
    }

    /// Scalar multiples of the identity: `T_n = a_n I`.
    pub fn scalar_family(dim: usize, seq: ScalarSequence) -> Result<Self, SetError> {
        if dim == 0 {
            return Err(SetError::Operator(OperatorError::EmptyOperator));
        }
        if seq.is_empty() {
            return Err(SetError::EmptyList);
        }
        Ok(OperatorSet {
            dim,
            kind: SetKind::ScalarFamily { seq },
        })
    }

    /// `lambda_k T_k` with every `|lambda_k| = 1` (validated up front for
    /// explicit lists, structurally for phase sequences).
    pub fn unimodular_scaled(base: OperatorSet, phases: ScalarSequence) -> Result<Self, SetError> {
        phases.check_unimodular()?;
        Ok(OperatorSet {
            dim: base.dim,
            kind: SetKind::UnimodularScaled {
                base: Arc::new(base),
                phases,
            },
        })
    }

    pub fn direct_sum_set(parts: Vec<OperatorSet>, mode: PairingMode) -> Result<Self, SetError> {
        if parts.is_empty() {
            return Err(SetError::EmptyList);
        }
        if mode == PairingMode::FullProduct
            && parts
                .iter()
                .any(|p| !matches!(p.kind, SetKind::FiniteList(_)))
        {
            return Err(SetError::FullProductNeedsFiniteLists);
        }
        let dim = parts.iter().map(|p| p.dim).sum();
        Ok(OperatorSet {
            dim,
            kind: SetKind::DirectSumSet {
                parts: Arc::new(parts),
                mode,
            },
        })
    }

    /// Conjugated family `phi T_k phi_inv`. The caller supplies the inverse;
    /// its quality is validated via `||phi phi_inv - I||`.
    pub fn conjugate_set(
        base: OperatorSet,
        phi: Operator,
        phi_inv: Operator,
    ) -> Result<Self, SetError> {
        if phi.dim() != base.dim {
            return Err(SetError::DimensionMismatch {
                expected: base.dim,
                got: phi.dim(),
            });
        }
        if phi_inv.dim() != phi.dim() {
            return Err(SetError::DimensionMismatch {
                expected: phi.dim(),
                got: phi_inv.dim(),
            });
        }
        let product = Operator::compose(phi.clone(), phi_inv.clone())?;
        let defect_op = {
            let m = product.materialize()?;
            let ident = nalgebra::DMatrix::<Complex64>::identity(m.nrows(), m.ncols());
            Operator::dense(m - ident)?
        };
        let defect = defect_op.norm_estimate()?.value;
        if defect > INVERSE_DEFECT_TOL {
            return Err(SetError::NotInvertible { defect });
        }
        Ok(OperatorSet {
            dim: base.dim,
            kind: SetKind::ConjugateSet {
                base: Arc::new(base),
                phi: Arc::new(phi),
                phi_inv: Arc::new(phi_inv),
            },
        })
    }

    /// Finite family of snapshots `ops[k]` taken at parameters `points[k]`.
    pub fn group_grid(ops: Vec<Operator>, points: Vec<Complex64>) -> Result<Self, SetError> {
        if ops.is_empty() || ops.len() != points.len() {
            return Err(SetError::EmptyList);
        }
        let dim = ops[0].dim();
        for op in &ops {
            if op.dim() != dim {
                return Err(SetError::DimensionMismatch {
                    expected: dim,
                    got: op.dim(),
                });
            }
        }
        Ok(OperatorSet {
            dim,
            kind: SetKind::GroupGrid {
                ops: Arc::new(ops),
                points: Arc::new(points),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Grid parameters when the set is a group snapshot family.
    pub fn grid_points(&self) -> Option<&[Complex64]> {
        match &self.kind {
            SetKind::GroupGrid { points, .. } => Some(points),
            _ => None,
        }
    }

    /// Number of members, or `None` when the family is unbounded.
    pub fn len_bound(&self) -> Option<u64> {
        match &self.kind {
            SetKind::FiniteList(ops) => Some(ops.len() as u64),
            SetKind::Powers { .. } => None,
            SetKind::ScalarFamily { seq } => seq.len(),
            SetKind::UnimodularScaled { base, phases } => match (base.len_bound(), phases.len()) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (Some(a), None) => Some(a),
                (None, b) => b,
            },
            SetKind::DirectSumSet { parts, mode } => match mode {
                PairingMode::Diagonal => {
                    parts.iter().filter_map(|p| p.len_bound()).min()
                }
                PairingMode::FullProduct => {
                    let mut total: u64 = 1;
                    for p in parts.iter() {
                        total = total.saturating_mul(p.len_bound()?);
                    }
                    Some(total)
                }
            },
            SetKind::ConjugateSet { base, .. } => base.len_bound(),
            SetKind::GroupGrid { ops, .. } => Some(ops.len() as u64),
        }
    }

    /// Walk the family in index order, starting at 1, visiting at most
    /// `budget.max_index()` members. Finite families simply end early.
    pub fn enumerate(&self, budget: EnumerationBudget) -> SetIter<'_> {
        SetIter::new(self, budget.max_index)
    }

    /// The member at a specific 1-based index, if the family reaches it.
    pub fn member_at(&self, index: u64) -> Option<Operator> {
        if index == 0 {
            return None;
        }
        let budget = EnumerationBudget { max_index: index };
        self.enumerate(budget)
            .find(|(k, _)| *k == index)
            .map(|(_, op)| op)
    }
}

enum IterState<'a> {
    Finite(&'a [Operator]),
    Powers {
        base: &'a Operator,
        chain: Option<Operator>,
    },
    Scalars {
        seq: &'a ScalarSequence,
        dim: usize,
    },
    Unimodular {
        inner: Box<SetIter<'a>>,
        phases: &'a ScalarSequence,
    },
    DiagonalSum(Vec<SetIter<'a>>),
    ProductSum {
        parts: &'a [OperatorSet],
        sizes: Vec<u64>,
        total: u64,
    },
    Conjugate {
        inner: Box<SetIter<'a>>,
        phi: &'a Operator,
        phi_inv: &'a Operator,
    },
}

/// Iterator over `(index, operator)` pairs; see [`OperatorSet::enumerate`].
pub struct SetIter<'a> {
    next_index: u64,
    max_index: u64,
    state: IterState<'a>,
}

impl<'a> SetIter<'a> {
    fn new(set: &'a OperatorSet, max_index: u64) -> Self {
        let state = match &set.kind {
            SetKind::FiniteList(ops) => IterState::Finite(ops),
            SetKind::Powers { base, start } => {
                // seed the chain with T^start (the identity when start = 0)
                let mut chain = Operator::identity(base.dim()).expect("dim >= 1");
                if *start > 0 {
                    chain = (**base).clone();
                    for _ in 1..*start {
                        chain = Operator::compose_left(base, &chain).expect("same dim");
                    }
                }
                IterState::Powers {
                    base,
                    chain: Some(chain),
                }
            }
            SetKind::ScalarFamily { seq } => IterState::Scalars {
                seq,
                dim: set.dim,
            },
            SetKind::UnimodularScaled { base, phases } => IterState::Unimodular {
                inner: Box::new(SetIter::new(base, max_index)),
                phases,
            },
            SetKind::DirectSumSet { parts, mode } => match mode {
                PairingMode::Diagonal => IterState::DiagonalSum(
                    parts.iter().map(|p| SetIter::new(p, max_index)).collect(),
                ),
                PairingMode::FullProduct => {
                    let sizes: Vec<u64> = parts
                        .iter()
                        .map(|p| p.len_bound().expect("validated finite"))
                        .collect();
                    let total = sizes.iter().product();
                    IterState::ProductSum {
                        parts,
                        sizes,
                        total,
                    }
                }
            },
            SetKind::ConjugateSet {
                base,
                phi,
                phi_inv,
            } => IterState::Conjugate {
                inner: Box::new(SetIter::new(base, max_index)),
                phi,
                phi_inv,
            },
            SetKind::GroupGrid { ops, .. } => IterState::Finite(ops),
        };
        SetIter {
            next_index: 1,
            max_index,
            state,
        }
    }
}

impl<'a> Iterator for SetIter<'a> {
    type Item = (u64, Operator);

    fn next(&mut self) -> Option<(u64, Operator)> {
        if self.next_index > self.max_index {
            return None;
        }
        let index = self.next_index;
        let op = match &mut self.state {
            IterState::Finite(ops) => ops.get((index - 1) as usize)?.clone(),
            IterState::Powers { base, chain } => {
                let current = chain.take()?;
                *chain = Some(Operator::compose_left(base, &current).expect("same dim"));
                current
            }
            IterState::Scalars { seq, dim } => {
                let a = seq.value(index)?;
                Operator::scalar(*dim, a).expect("finite coefficient")
            }
            IterState::Unimodular { inner, phases } => {
                let (_, op) = inner.next()?;
                let lambda = phases.value(index)?;
                let scale = Operator::scalar(op.dim(), lambda).expect("finite phase");
                Operator::compose(scale, op).expect("same dim")
            }
            IterState::DiagonalSum(inners) => {
                let mut blocks = Vec::with_capacity(inners.len());
                for it in inners.iter_mut() {
                    let (_, op) = it.next()?;
                    blocks.push(op);
                }
                Operator::direct_sum(blocks).expect("validated nonempty")
            }
            IterState::ProductSum {
                parts,
                sizes,
                total,
            } => {
                if index > *total {
                    return None;
                }
                // mixed-radix decode, first part fastest
                let mut rem = index - 1;
                let mut blocks = Vec::with_capacity(parts.len());
                for (part, size) in parts.iter().zip(sizes.iter()) {
                    let digit = rem % size;
                    rem /= size;
                    blocks.push(part.member_at(digit + 1).expect("digit < size"));
                }
                Operator::direct_sum(blocks).expect("validated nonempty")
            }
            IterState::Conjugate {
                inner,
                phi,
                phi_inv,
            } => {
                let (_, op) = inner.next()?;
                let right = Operator::compose_left(&op, phi_inv).expect("same dim");
                Operator::compose_left(phi, &right).expect("same dim")
            }
        };
        self.next_index += 1;
        Some((index, op))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Vector;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn cr(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn materialized(set: &OperatorSet, budget: u64) -> Vec<DMatrix<Complex64>> {
        set.enumerate(EnumerationBudget::new(budget).unwrap())
            .map(|(_, op)| op.materialize().unwrap())
            .collect()
    }

    #[test]
    fn powers_enumerate_as_successive_matrix_powers() {
        let b = Operator::backward_shift(4, cr(2.0)).unwrap();
        let set = OperatorSet::powers(b.clone(), 1).unwrap();
        let mats = materialized(&set, 3);
        let m = b.materialize().unwrap();
        assert_eq!(mats.len(), 3);
        assert!((mats[0].clone() - &m).norm() == 0.0);
        assert!((mats[1].clone() - &m * &m).norm() < 1e-14);
        assert!((mats[2].clone() - &m * &m * &m).norm() < 1e-14);
    }

    #[test]
    fn powers_with_start_zero_begin_at_the_identity() {
        let b = Operator::backward_shift(3, cr(1.0)).unwrap();
        let set = OperatorSet::powers(b, 0).unwrap();
        let mats = materialized(&set, 2);
        let ident = DMatrix::<Complex64>::identity(3, 3);
        assert_eq!(mats[0], ident);
    }

    #[test]
    fn scalar_family_value_at_index_ten() {
        let set = OperatorSet::scalar_family(2, ScalarSequence::OnePlusInverse).unwrap();
        let op = set.member_at(10).unwrap();
        assert_eq!(op.as_scalar().unwrap(), cr(1.1));
    }

    #[test]
    fn finite_list_ends_before_the_budget() {
        let ops = vec![
            Operator::identity(2).unwrap(),
            Operator::scalar(2, cr(2.0)).unwrap(),
        ];
        let set = OperatorSet::finite_list(ops).unwrap();
        let seen: Vec<u64> = set
            .enumerate(EnumerationBudget::new(10).unwrap())
            .map(|(k, _)| k)
            .collect();
        assert_eq!(seen, vec![1, 2]);
        assert!(set.member_at(3).is_none());
    }

    #[test]
    fn enumeration_is_deterministic() {
        let set = OperatorSet::powers(
            Operator::scalar(1, Complex64::from_polar(1.0, 0.5)).unwrap(),
            1,
        )
        .unwrap();
        let a = materialized(&set, 20);
        let b = materialized(&set, 20);
        assert_eq!(a, b);
    }

    #[test]
    fn unimodular_scaling_preserves_norms() {
        let base = OperatorSet::powers(Operator::backward_shift(5, cr(2.0)).unwrap(), 1).unwrap();
        let scaled = OperatorSet::unimodular_scaled(
            base.clone(),
            ScalarSequence::unimodular_phase(std::f64::consts::FRAC_PI_4).unwrap(),
        )
        .unwrap();
        let budget = EnumerationBudget::new(6).unwrap();
        for ((_, t), (_, lt)) in base.enumerate(budget).zip(scaled.enumerate(budget)) {
            let a = t.norm_estimate().unwrap().value;
            let b = lt.norm_estimate().unwrap().value;
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn non_unimodular_phases_are_rejected() {
        let base = OperatorSet::powers(Operator::identity(2).unwrap(), 1).unwrap();
        let err = OperatorSet::unimodular_scaled(base.clone(), ScalarSequence::OnePlusInverse);
        assert!(matches!(err, Err(SetError::NotUnimodular { .. })));

        let bad = ScalarSequence::explicit(vec![cr(1.0), cr(0.5)]).unwrap();
        assert!(matches!(
            OperatorSet::unimodular_scaled(base, bad),
            Err(SetError::NotUnimodular { index: 2, .. })
        ));
    }

    #[test]
    fn diagonal_pairing_zips_parts() {
        let a = OperatorSet::scalar_family(1, ScalarSequence::OnePlusInverse).unwrap();
        let b = OperatorSet::powers(Operator::scalar(2, cr(3.0)).unwrap(), 1).unwrap();
        let sum = OperatorSet::direct_sum_set(vec![a, b], PairingMode::Diagonal).unwrap();
        assert_eq!(sum.dim(), 3);
        let op = sum.member_at(2).unwrap();
        let x = Vector::from_real(&[1.0, 1.0, 1.0]).unwrap();
        let y = op.apply(&x);
        assert_relative_eq!(y.coords()[0].re, 1.5, max_relative = 1e-15); // a_2 = 1.5
        assert_relative_eq!(y.coords()[1].re, 9.0, max_relative = 1e-15); // 3^2
        assert_relative_eq!(y.coords()[2].re, 9.0, max_relative = 1e-15);
    }

    #[test]
    fn full_product_pairing_walks_mixed_radix() {
        let a = OperatorSet::finite_list(vec![
            Operator::scalar(1, cr(1.0)).unwrap(),
            Operator::scalar(1, cr(2.0)).unwrap(),
        ])
        .unwrap();
        let b = OperatorSet::finite_list(vec![
            Operator::scalar(1, cr(10.0)).unwrap(),
            Operator::scalar(1, cr(20.0)).unwrap(),
            Operator::scalar(1, cr(30.0)).unwrap(),
        ])
        .unwrap();
        let sum = OperatorSet::direct_sum_set(vec![a, b], PairingMode::FullProduct).unwrap();
        assert_eq!(sum.len_bound(), Some(6));
        // first part fastest: (1,10), (2,10), (1,20), (2,20), (1,30), (2,30)
        let expect = [
            (1.0, 10.0),
            (2.0, 10.0),
            (1.0, 20.0),
            (2.0, 20.0),
            (1.0, 30.0),
            (2.0, 30.0),
        ];
        let x = Vector::from_real(&[1.0, 1.0]).unwrap();
        for (k, op) in sum.enumerate(EnumerationBudget::new(10).unwrap()) {
            let y = op.apply(&x);
            let (p, q) = expect[(k - 1) as usize];
            assert_eq!(y.coords()[0].re, p);
            assert_eq!(y.coords()[1].re, q);
        }
    }

    #[test]
    fn full_product_requires_finite_parts() {
        let a = OperatorSet::scalar_family(1, ScalarSequence::OnePlusInverse).unwrap();
        let b = OperatorSet::finite_list(vec![Operator::identity(1).unwrap()]).unwrap();
        assert!(matches!(
            OperatorSet::direct_sum_set(vec![a, b], PairingMode::FullProduct),
            Err(SetError::FullProductNeedsFiniteLists)
        ));
    }

    #[test]
    fn conjugate_set_applies_phi_t_phi_inv() {
        let base = OperatorSet::finite_list(vec![Operator::diagonal(vec![
            cr(2.0),
            cr(3.0),
        ])
        .unwrap()])
        .unwrap();
        // phi swaps the two coordinates; it is its own inverse
        let swap = DMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        let phi = Operator::dense(swap.clone()).unwrap();
        let phi_inv = Operator::dense(swap).unwrap();
        let conj = OperatorSet::conjugate_set(base, phi, phi_inv).unwrap();
        let op = conj.member_at(1).unwrap();
        let m = op.materialize().unwrap();
        assert_eq!(m[(0, 0)], cr(3.0));
        assert_eq!(m[(1, 1)], cr(2.0));
    }

    #[test]
    fn conjugate_set_rejects_bad_inverse() {
        let base = OperatorSet::finite_list(vec![Operator::identity(2).unwrap()]).unwrap();
        let phi = Operator::identity(2).unwrap();
        let not_inverse = Operator::scalar(2, cr(2.0)).unwrap();
        assert!(matches!(
            OperatorSet::conjugate_set(base, phi, not_inverse),
            Err(SetError::NotInvertible { .. })
        ));
    }

    #[test]
    fn member_at_matches_enumeration() {
        let set = OperatorSet::powers(Operator::backward_shift(3, cr(2.0)).unwrap(), 1).unwrap();
        for (k, op) in set.enumerate(EnumerationBudget::new(7).unwrap()) {
            let direct = set.member_at(k).unwrap();
            assert_eq!(
                direct.materialize().unwrap(),
                op.materialize().unwrap(),
                "index {k}"
            );
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        assert!(matches!(
            EnumerationBudget::new(0),
            Err(SetError::ZeroBudget)
        ));
    }
}
