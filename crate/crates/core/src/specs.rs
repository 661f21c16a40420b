//! Declarative descriptions of operators, sets, groups, and grids.
//!
//! These are the JSON-facing types: a config document describes what to build
//! (`{"kind": "backward_shift", "dim": 8, "weight": [2.0, 0.0]}`) and the
//! `build_*` functions turn descriptions into live values, running the same
//! validation as the programmatic constructors. Complex numbers are always
//! `[re, im]` pairs on the wire.
//!
//! Unknown `kind` strings are rejected by deserialization itself (serde's
//! tagged-enum handling), so a config can only ever describe things this
//! module knows how to build.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groups::{CRegGroup, ComplexGrid, GroupError};
use crate::operators::{Operator, OperatorError};
use crate::sets::{OperatorSet, PairingMode, ScalarSequence, SetError};

/// A complex number on the wire: `[re, im]`.
pub type ComplexPair = [f64; 2];

fn cx(p: ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn cx_vec(ps: &[ComplexPair]) -> Vec<Complex64> {
    ps.iter().copied().map(cx).collect()
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("matrix rows have inconsistent lengths: row 0 has {expected}, row {row} has {got}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("conjugating map is not invertible: {reason}")]
    NotInvertible { reason: String },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Description of a single operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// Dense matrix given row by row.
    Dense { rows: Vec<Vec<ComplexPair>> },
    Diagonal { entries: Vec<ComplexPair> },
    Scalar { dim: usize, value: ComplexPair },
    Identity { dim: usize },
    BackwardShift { dim: usize, weight: ComplexPair },
    ForwardShift { dim: usize, weight: ComplexPair },
    /// Fixes the first basis vector, annihilates the rest.
    RankOneFix { dim: usize },
    Composition {
        left: Box<OperatorSpec>,
        right: Box<OperatorSpec>,
    },
    DirectSum { parts: Vec<OperatorSpec> },
}

/// Description of an indexed scalar sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    /// `a_n = 1 + 1/n`.
    OnePlusInverse,
    /// `lambda_n = exp(i n theta)`.
    UnimodularPhase { theta: f64 },
    ExplicitList { values: Vec<ComplexPair> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingModeSpec {
    #[default]
    Diagonal,
    FullProduct,
}

/// Description of an operator family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    FiniteList { ops: Vec<OperatorSpec> },
    Powers {
        base: Box<OperatorSpec>,
        #[serde(default = "default_start_exponent")]
        start: u64,
    },
    ScalarFamily { dim: usize, sequence: SequenceSpec },
    UnimodularScaled {
        base: Box<SetSpec>,
        phases: SequenceSpec,
    },
    DirectSumSet {
        parts: Vec<SetSpec>,
        #[serde(default)]
        mode: PairingModeSpec,
    },
    ConjugateSet {
        base: Box<SetSpec>,
        phi: Box<OperatorSpec>,
        /// Optional explicit inverse; computed numerically when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi_inv: Option<Box<OperatorSpec>>,
    },
    /// Snapshots of a regularized exponential group over a parameter grid.
    GroupGrid { group: GroupSpec, grid: GridSpec },
}

fn default_start_exponent() -> u64 {
    1
}

/// Description of a regularized group `S(z) = exp(zA) C`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub generator: OperatorSpec,
    pub regularizer: OperatorSpec,
}

/// Description of a finite grid of complex parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Explicit { points: Vec<ComplexPair> },
    Rectangle {
        re: [f64; 2],
        im: [f64; 2],
        steps_re: usize,
        steps_im: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        extra_points: Vec<ComplexPair>,
    },
}

pub fn build_operator(spec: &OperatorSpec) -> Result<Operator, SpecError> {
    match spec {
        OperatorSpec::Dense { rows } => {
            let nrows = rows.len();
            if nrows == 0 || rows[0].is_empty() {
                return Err(SpecError::EmptyMatrix);
            }
            let ncols = rows[0].len();
            for (i, row) in rows.iter().enumerate() {
                if row.len() != ncols {
                    return Err(SpecError::RaggedRows {
                        row: i,
                        expected: ncols,
                        got: row.len(),
                    });
                }
            }
            let m = DMatrix::from_row_iterator(
                nrows,
                ncols,
                rows.iter().flatten().copied().map(cx),
            );
            Ok(Operator::dense(m)?)
        }
        OperatorSpec::Diagonal { entries } => Ok(Operator::diagonal(cx_vec(entries))?),
        OperatorSpec::Scalar { dim, value } => Ok(Operator::scalar(*dim, cx(*value))?),
        OperatorSpec::Identity { dim } => Ok(Operator::identity(*dim)?),
        OperatorSpec::BackwardShift { dim, weight } => {
            Ok(Operator::backward_shift(*dim, cx(*weight))?)
        }
        OperatorSpec::ForwardShift { dim, weight } => {
            Ok(Operator::forward_shift(*dim, cx(*weight))?)
        }
        OperatorSpec::RankOneFix { dim } => Ok(Operator::rank_one_fix(*dim)?),
        OperatorSpec::Composition { left, right } => {
            let f = build_operator(left)?;
            let g = build_operator(right)?;
            Ok(Operator::compose(f, g)?)
        }
        OperatorSpec::DirectSum { parts } => {
            let ops = parts
                .iter()
                .map(build_operator)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Operator::direct_sum(ops)?)
        }
    }
}

pub fn build_sequence(spec: &SequenceSpec) -> Result<ScalarSequence, SpecError> {
    match spec {
        SequenceSpec::OnePlusInverse => Ok(ScalarSequence::OnePlusInverse),
        SequenceSpec::UnimodularPhase { theta } => {
            Ok(ScalarSequence::unimodular_phase(*theta)?)
        }
        SequenceSpec::ExplicitList { values } => Ok(ScalarSequence::explicit(cx_vec(values))?),
    }
}

pub fn build_set(spec: &SetSpec) -> Result<OperatorSet, SpecError> {
    match spec {
        SetSpec::FiniteList { ops } => {
            let built = ops.iter().map(build_operator).collect::<Result<Vec<_>, _>>()?;
            Ok(OperatorSet::finite_list(built)?)
        }
        SetSpec::Powers { base, start } => {
            Ok(OperatorSet::powers(build_operator(base)?, *start)?)
        }
        SetSpec::ScalarFamily { dim, sequence } => {
            Ok(OperatorSet::scalar_family(*dim, build_sequence(sequence)?)?)
        }
        SetSpec::UnimodularScaled { base, phases } => Ok(OperatorSet::unimodular_scaled(
            build_set(base)?,
            build_sequence(phases)?,
        )?),
        SetSpec::DirectSumSet { parts, mode } => {
            let built = parts.iter().map(build_set).collect::<Result<Vec<_>, _>>()?;
            let mode = match mode {
                PairingModeSpec::Diagonal => PairingMode::Diagonal,
                PairingModeSpec::FullProduct => PairingMode::FullProduct,
            };
            Ok(OperatorSet::direct_sum_set(built, mode)?)
        }
        SetSpec::ConjugateSet { base, phi, phi_inv } => {
            let base = build_set(base)?;
            let phi = build_operator(phi)?;
            let inv = match phi_inv {
                Some(spec) => build_operator(spec)?,
                None => {
                    let m = phi.materialize()?;
                    let inv = m.try_inverse().ok_or_else(|| SpecError::NotInvertible {
                        reason: "matrix inversion failed (singular to working precision)"
                            .to_string(),
                    })?;
                    Operator::dense(inv)?
                }
            };
            Ok(OperatorSet::conjugate_set(base, phi, inv)?)
        }
        SetSpec::GroupGrid { group, grid } => {
            let group = build_group(group)?;
            let grid = build_grid(grid)?;
            Ok(group.grid_set(&grid)?)
        }
    }
}

pub fn build_group(spec: &GroupSpec) -> Result<CRegGroup, SpecError> {
    Ok(CRegGroup::build(
        build_operator(&spec.generator)?,
        build_operator(&spec.regularizer)?,
    )?)
}

pub fn build_grid(spec: &GridSpec) -> Result<ComplexGrid, SpecError> {
    match spec {
        GridSpec::Explicit { points } => Ok(ComplexGrid::explicit(cx_vec(points))?),
        GridSpec::Rectangle {
            re,
            im,
            steps_re,
            steps_im,
            extra_points,
        } => {
            let grid = ComplexGrid::rectangle((re[0], re[1]), (im[0], im[1]), *steps_re, *steps_im)?;
            if extra_points.is_empty() {
                Ok(grid)
            } else {
                Ok(grid.with_extra_points(cx_vec(extra_points))?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::EnumerationBudget;
    use crate::space::{NormKind, Vector};
    use approx::assert_relative_eq;

    fn cr(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalar_spec_builds_the_scaling_map() {
        let spec: OperatorSpec =
            serde_json::from_str(r#"{"kind": "scalar", "dim": 4, "value": [1.5, 0.0]}"#).unwrap();
        let t = build_operator(&spec).unwrap();
        let x = Vector::from_real(&[1.0, -2.0, 0.0, 3.0]).unwrap();
        let y = t.apply(&x);
        for i in 0..4 {
            assert_relative_eq!(y.coords()[i].re, 1.5 * x.coords()[i].re, epsilon = 1e-15);
            assert_eq!(y.coords()[i].im, 0.0);
        }
    }

    #[test]
    fn shift_spec_matches_the_weighted_shift() {
        let spec: OperatorSpec = serde_json::from_str(
            r#"{"kind": "backward_shift", "dim": 8, "weight": [2.0, 0.0]}"#,
        )
        .unwrap();
        let t = build_operator(&spec).unwrap();
        assert_eq!(t.norm_estimate().unwrap().value, 2.0);
        let y = t.apply(&Vector::basis(8, 1));
        assert_eq!(y.coords()[0], cr(2.0));
    }

    #[test]
    fn rank_one_spec_fixes_the_first_basis_line() {
        let spec: OperatorSpec =
            serde_json::from_str(r#"{"kind": "rank_one_fix", "dim": 4}"#).unwrap();
        let t = build_operator(&spec).unwrap();
        let e1 = Vector::basis(4, 0);
        let e2 = Vector::basis(4, 1);
        assert_eq!(t.apply(&e1), e1);
        assert_eq!(t.apply(&e2).norm(NormKind::L2), 0.0);
    }

    #[test]
    fn dense_spec_rejects_ragged_rows() {
        let spec = OperatorSpec::Dense {
            rows: vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[1.0, 0.0]]],
        };
        assert!(matches!(
            build_operator(&spec),
            Err(SpecError::RaggedRows { row: 1, expected: 2, got: 1 })
        ));
    }

    #[test]
    fn unknown_kind_is_a_deserialization_error() {
        let err = serde_json::from_str::<OperatorSpec>(r#"{"kind": "adjoint", "dim": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown variant"), "{err}");
        assert!(err.contains("adjoint"), "{err}");
    }

    #[test]
    fn powers_start_defaults_to_one() {
        let spec: SetSpec = serde_json::from_str(
            r#"{"kind": "powers", "base": {"kind": "scalar", "dim": 2, "value": [2.0, 0.0]}}"#,
        )
        .unwrap();
        let set = build_set(&spec).unwrap();
        let budget = EnumerationBudget::new(2).unwrap();
        let members: Vec<_> = set.enumerate(budget).collect();
        // start = 1: first member is the base itself, not the identity
        let x = Vector::basis(2, 0);
        assert_eq!(members[0].1.apply(&x).coords()[0], cr(2.0));
        assert_eq!(members[1].1.apply(&x).coords()[0], cr(4.0));
    }

    #[test]
    fn non_unimodular_phases_are_rejected_at_build() {
        let spec: SetSpec = serde_json::from_str(
            r#"{
                "kind": "unimodular_scaled",
                "base": {"kind": "powers", "base": {"kind": "identity", "dim": 2}},
                "phases": {"kind": "explicit_list", "values": [[2.0, 0.0]]}
            }"#,
        )
        .unwrap();
        match build_set(&spec) {
            Err(SpecError::Set(SetError::NotUnimodular { .. })) => {}
            other => panic!("expected NotUnimodular, got {other:?}"),
        }
    }

    #[test]
    fn conjugate_spec_inverts_numerically_when_inverse_is_omitted() {
        let spec: SetSpec = serde_json::from_str(
            r#"{
                "kind": "conjugate_set",
                "base": {"kind": "scalar_family", "dim": 2, "sequence": {"kind": "one_plus_inverse"}},
                "phi": {"kind": "dense", "rows": [[[2.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]}
            }"#,
        )
        .unwrap();
        let set = build_set(&spec).unwrap();
        // conjugating a scalar family changes nothing: phi a I phi^{-1} = a I
        let budget = EnumerationBudget::new(3).unwrap();
        let x = Vector::basis(2, 0);
        for (k, t) in set.enumerate(budget) {
            let y = t.apply(&x);
            let a = 1.0 + 1.0 / k as f64;
            assert_relative_eq!(y.coords()[0].re, a, epsilon = 1e-12);
            assert!(y.coords()[1].norm() < 1e-12);
        }
    }

    #[test]
    fn singular_conjugation_is_rejected() {
        let spec = SetSpec::ConjugateSet {
            base: Box::new(SetSpec::ScalarFamily {
                dim: 2,
                sequence: SequenceSpec::OnePlusInverse,
            }),
            phi: Box::new(OperatorSpec::Dense {
                rows: vec![vec![[1.0, 0.0], [1.0, 0.0]], vec![[1.0, 0.0], [1.0, 0.0]]],
            }),
            phi_inv: None,
        };
        assert!(matches!(
            build_set(&spec),
            Err(SpecError::NotInvertible { .. })
        ));
    }

    #[test]
    fn group_grid_spec_snapshots_the_exponential() {
        let spec: SetSpec = serde_json::from_str(
            r#"{
                "kind": "group_grid",
                "group": {
                    "generator": {"kind": "identity", "dim": 2},
                    "regularizer": {"kind": "identity", "dim": 2}
                },
                "grid": {"kind": "explicit", "points": [[0.0, 0.0], [1.0, 0.0]]}
            }"#,
        )
        .unwrap();
        let set = build_set(&spec).unwrap();
        let budget = EnumerationBudget::new(2).unwrap();
        let x = Vector::basis(2, 0);
        let members: Vec<_> = set.enumerate(budget).collect();
        assert_eq!(members[0].1.apply(&x).coords()[0], cr(1.0));
        assert_relative_eq!(
            members[1].1.apply(&x).coords()[0].re,
            std::f64::consts::E,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rectangle_grid_spec_appends_extra_points() {
        let spec: GridSpec = serde_json::from_str(
            r#"{
                "kind": "rectangle",
                "re": [0.0, 1.0], "im": [0.0, 0.0],
                "steps_re": 3, "steps_im": 1,
                "extra_points": [[0.0, 6.283185307179586]]
            }"#,
        )
        .unwrap();
        let grid = build_grid(&spec).unwrap();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid.points()[3], Complex64::new(0.0, 6.283185307179586));
    }

    #[test]
    fn specs_round_trip_through_json() {
        let spec = SetSpec::UnimodularScaled {
            base: Box::new(SetSpec::Powers {
                base: Box::new(OperatorSpec::Identity { dim: 2 }),
                start: 1,
            }),
            phases: SequenceSpec::UnimodularPhase {
                theta: std::f64::consts::FRAC_PI_4,
            },
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: SetSpec = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string(&back).unwrap();
        assert_eq!(text, again);
    }
}
