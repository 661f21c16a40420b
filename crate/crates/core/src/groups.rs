//! One-parameter operator families `S(z) = exp(zA) C` built from a generator
//! `A` and a regularizer `C` that commute.
//!
//! Commutation makes the algebraic laws hold by construction: `S(0) = C` and
//! `S(z+w)C = S(z)S(w)`. The module measures those laws as numerical defects,
//! snapshots the family on finite grids of complex parameters so the
//! recurrence machinery can search it, transports witnesses through `C`, and
//! conjugates whole families by invertible maps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::operators::{Operator, OperatorError, OperatorKind};
use crate::recurrence::{
    certify_recurrent_set, RecurrenceError, RecurrenceWitness, SetRecurrenceCertificate,
};
use crate::sets::{EnumerationBudget, OperatorSet, SetError};
use crate::space::{Ball, SpaceError, Vector};
use crate::transforms::{commutant_pushforward, TransformError, TransferredWitness};

/// Commutation gate for the generator/regularizer pair.
pub const COMMUTATION_TOL: f64 = 1e-10;
/// Parameters are rejected once `e^{|z| ||A||}` would exceed 1e100.
pub const OVERFLOW_GUARD_LN: f64 = 230.258509299404568; // ln(1e100)
/// Invertibility gate for conjugating maps: `||phi phi^{-1} - I||`.
pub const INVERTIBILITY_TOL: f64 = 1e-10;
/// Snapshots within this distance of the identity are reported as exact
/// return points of a scan.
pub const IDENTITY_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("generator and regularizer do not commute: defect {defect:.3e} > {tol:.3e}")]
    NotCommuting { defect: f64, tol: f64 },
    #[error("parameter overflow: |z|*||A|| = {magnitude:.3e} exceeds the exp guard")]
    Overflow { magnitude: f64 },
    #[error("matrix exponential did not converge")]
    ExponentialFailed,
    #[error("conjugating map is not invertible: inverse defect {defect:.3e}")]
    NotInvertible { defect: f64 },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("grid point {value} is not finite")]
    NonFinitePoint { value: Complex64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Recurrence(#[from] RecurrenceError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Finite, deterministically ordered set of complex parameters at which a
/// family is snapshotted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexGrid {
    #[serde(with = "crate::space::complex_pairs")]
    points: Vec<Complex64>,
    description: String,
}

impl ComplexGrid {
    /// Explicit list of parameters, kept in the given order.
    pub fn explicit(points: Vec<Complex64>) -> Result<Self, GroupError> {
        Self::validated(points, "explicit list".to_string())
    }

    /// Axis-aligned rectangle sampled on a `steps_re x steps_im` lattice.
    /// Points are ordered scanline-wise: imaginary part outer (ascending),
    /// real part inner (ascending). A single step collapses that axis to its
    /// lower bound.
    pub fn rectangle(
        re: (f64, f64),
        im: (f64, f64),
        steps_re: usize,
        steps_im: usize,
    ) -> Result<Self, GroupError> {
        let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            if n <= 1 {
                vec![lo]
            } else {
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        };
        let mut points = Vec::with_capacity(steps_re.max(1) * steps_im.max(1));
        for b in axis(im.0, im.1, steps_im) {
            for a in axis(re.0, re.1, steps_re) {
                points.push(Complex64::new(a, b));
            }
        }
        Self::validated(
            points,
            format!(
                "rectangle re [{}, {}] x im [{}, {}], {steps_re} x {steps_im} steps",
                re.0, re.1, im.0, im.1
            ),
        )
    }

    /// Append extra explicit points (e.g. known period points) after the
    /// existing ones.
    pub fn with_extra_points(mut self, extra: Vec<Complex64>) -> Result<Self, GroupError> {
        self.description = format!("{} + {} extra points", self.description, extra.len());
        self.points.extend(extra);
        Self::validated(self.points, self.description)
    }

    fn validated(points: Vec<Complex64>, description: String) -> Result<Self, GroupError> {
        if points.is_empty() {
            return Err(GroupError::EmptyGrid);
        }
        if let Some(bad) = points
            .iter()
            .find(|p| !p.re.is_finite() || !p.im.is_finite())
        {
            return Err(GroupError::NonFinitePoint { value: *bad });
        }
        Ok(ComplexGrid { points, description })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty grids
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// Operator family `S(z) = exp(zA) C` with commuting `A` and `C`.
#[derive(Debug, Clone)]
pub struct CRegGroup {
    generator: Operator,
    regularizer: Operator,
    dim: usize,
    /// Upper bound on `||A||`, cached for the overflow guard.
    generator_norm: f64,
    /// The regularizer is (numerically) zero; every snapshot is then the
    /// zero operator. Accepted but flagged.
    degenerate: bool,
}

impl CRegGroup {
    /// Validate commutation and build the family.
    pub fn build(generator: Operator, regularizer: Operator) -> Result<Self, GroupError> {
        if generator.dim() != regularizer.dim() {
            return Err(GroupError::DimensionMismatch {
                expected: generator.dim(),
                got: regularizer.dim(),
            });
        }
        let a = generator.materialize()?;
        let c = regularizer.materialize()?;
        let comm = &a * &c - &c * &a;
        let est = linalg::spectral_norm(&comm)
            .map_err(|stall| OperatorError::NonConvergence { iterations: stall.iterations })?;
        let defect = est.value + est.error_bound;
        if defect > COMMUTATION_TOL {
            return Err(GroupError::NotCommuting { defect, tol: COMMUTATION_TOL });
        }
        let generator_norm = generator.norm_estimate()?.upper();
        let reg_norm = regularizer.norm_estimate()?.upper();
        Ok(CRegGroup {
            dim: generator.dim(),
            generator,
            regularizer,
            generator_norm,
            degenerate: reg_norm == 0.0,
        })
    }

    pub fn generator(&self) -> &Operator {
        &self.generator
    }

    pub fn regularizer(&self) -> &Operator {
        &self.regularizer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Snapshot `S(z) = exp(zA) C`.
    ///
    /// Scalar and diagonal generators take the exact componentwise
    /// exponential; everything else goes through the dense scaling-and-
    /// squaring routine. Structured results are kept structured so norm
    /// queries on snapshots stay exact.
    pub fn evaluate(&self, z: Complex64) -> Result<Operator, GroupError> {
        let magnitude = z.norm() * self.generator_norm;
        if !magnitude.is_finite() || magnitude > OVERFLOW_GUARD_LN {
            return Err(GroupError::Overflow { magnitude });
        }
        let exp_part = if let Some(a) = self.generator.as_scalar() {
            Operator::scalar(self.dim, (z * a).exp())?
        } else if let OperatorKind::Diagonal(entries) = self.generator.kind() {
            Operator::diagonal(entries.iter().map(|d| (z * d).exp()).collect())?
        } else {
            let m = self.generator.materialize()? * z;
            Operator::dense(linalg::expm(&m).ok_or(GroupError::ExponentialFailed)?)?
        };
        // keep scalar/diagonal structure through the product with C
        let snapshot = match (exp_part.as_scalar(), self.regularizer.kind()) {
            (Some(e), _) if self.regularizer.as_scalar().is_some() => {
                Operator::scalar(self.dim, e * self.regularizer.as_scalar().unwrap())?
            }
            (Some(e), OperatorKind::Diagonal(d)) => {
                Operator::diagonal(d.iter().map(|c| e * c).collect())?
            }
            (None, _) => match (exp_part.kind(), self.regularizer.as_scalar()) {
                (OperatorKind::Diagonal(ed), Some(c)) => {
                    Operator::diagonal(ed.iter().map(|e| e * c).collect())?
                }
                (OperatorKind::Diagonal(ed), None) => {
                    if let OperatorKind::Diagonal(cd) = self.regularizer.kind() {
                        Operator::diagonal(ed.iter().zip(cd.iter()).map(|(e, c)| e * c).collect())?
                    } else {
                        Operator::compose(exp_part.clone(), self.regularizer.clone())?
                    }
                }
                _ => Operator::compose(exp_part.clone(), self.regularizer.clone())?,
            },
            (Some(_), _) => Operator::compose(exp_part, self.regularizer.clone())?,
        };
        Ok(snapshot)
    }

    /// Largest observed law defect `||S(z+w)C - S(z)S(w)||` over the samples,
    /// together with `||S(0) - C||` (zero by construction, reported anyway).
    pub fn axioms_defect(
        &self,
        samples: &[(Complex64, Complex64)],
    ) -> Result<AxiomsReport, GroupError> {
        let c = self.regularizer.materialize()?;
        let s0 = self.evaluate(Complex64::new(0.0, 0.0))?.materialize()?;
        let s0_defect = spectral_upper(&(&s0 - &c))?;
        let mut max_defect = 0.0_f64;
        for &(z, w) in samples {
            let lhs = self.evaluate(z + w)?.materialize()? * &c;
            let rhs = self.evaluate(z)?.materialize()? * self.evaluate(w)?.materialize()?;
            max_defect = max_defect.max(spectral_upper(&(lhs - rhs))?);
        }
        Ok(AxiomsReport { max_defect, s0_defect })
    }

    /// Snapshot the family on a grid as a searchable operator set. Snapshots
    /// are taken eagerly, in grid order.
    pub fn grid_set(&self, grid: &ComplexGrid) -> Result<OperatorSet, GroupError> {
        let ops = grid
            .points()
            .iter()
            .map(|&z| self.evaluate(z))
            .collect::<Result<Vec<_>, _>>()?;
        OperatorSet::group_grid(ops, grid.points().to_vec()).map_err(GroupError::Set)
    }

    /// Certify ball returns of the snapshot family and point out grid
    /// parameters whose snapshot is (numerically) the identity — those give
    /// value-0 certificates for every ball.
    pub fn recurrence_scan(
        &self,
        grid: &ComplexGrid,
        balls: &[Ball],
        margin: Option<f64>,
    ) -> Result<GroupScanReport, GroupError> {
        let set = self.grid_set(grid)?;
        let budget = EnumerationBudget::new(grid.len() as u64).map_err(GroupError::Set)?;
        let certificates = certify_recurrent_set(&set, balls, budget, margin)?;
        let mut identity_points = Vec::new();
        for (pos, (&z, op)) in grid
            .points()
            .iter()
            .zip(set.enumerate(budget).map(|(_, op)| op))
            .enumerate()
        {
            let diff = op.materialize()? - nalgebra::DMatrix::<Complex64>::identity(self.dim, self.dim);
            if spectral_upper(&diff)? <= IDENTITY_POINT_TOL {
                identity_points.push((pos, z));
            }
        }
        Ok(GroupScanReport { certificates, identity_points })
    }

    /// Transport a witness (over a snapshot family of this group) through the
    /// regularizer: `x` near-returning gives `Cx` near-returning with
    /// residual at most `||C|| res + defect ||x|| + 1e-9`, since `C` commutes
    /// with every snapshot.
    pub fn c_image_witness(
        &self,
        snapshot_family: &OperatorSet,
        x: &Vector,
        witness: &RecurrenceWitness,
    ) -> Result<TransferredWitness, GroupError> {
        commutant_pushforward(snapshot_family, &self.regularizer, x, witness, COMMUTATION_TOL)
            .map_err(GroupError::Transform)
    }

    /// Conjugated family `z -> phi^{-1} S(z) phi`, again of generator/
    /// regularizer form with `A' = phi^{-1} A phi`, `C' = phi^{-1} C phi`.
    /// Scalar generators and regularizers are preserved exactly (they commute
    /// with everything), keeping the exact exponential path available.
    pub fn similar_group(&self, phi: &Operator) -> Result<CRegGroup, GroupError> {
        if phi.dim() != self.dim {
            return Err(GroupError::DimensionMismatch { expected: self.dim, got: phi.dim() });
        }
        let p = phi.materialize()?;
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or(GroupError::NotInvertible { defect: f64::INFINITY })?;
        let defect = spectral_upper(
            &(&p * &p_inv - nalgebra::DMatrix::<Complex64>::identity(self.dim, self.dim)),
        )?;
        if defect > INVERTIBILITY_TOL {
            return Err(GroupError::NotInvertible { defect });
        }
        let conjugate = |op: &Operator| -> Result<Operator, GroupError> {
            if op.as_scalar().is_some() {
                return Ok(op.clone());
            }
            Ok(Operator::dense(&p_inv * op.materialize()? * &p)?)
        };
        CRegGroup::build(conjugate(&self.generator)?, conjugate(&self.regularizer)?)
    }
}

/// Law defects measured by [`CRegGroup::axioms_defect`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxiomsReport {
    pub max_defect: f64,
    pub s0_defect: f64,
}

/// Outcome of [`CRegGroup::recurrence_scan`].
#[derive(Debug)]
pub struct GroupScanReport {
    /// Per-ball certification outcomes, in ball order.
    pub certificates: Vec<Result<Option<SetRecurrenceCertificate>, RecurrenceError>>,
    /// Grid positions (0-based) and parameters whose snapshot is the
    /// identity within [`IDENTITY_POINT_TOL`].
    pub identity_points: Vec<(usize, Complex64)>,
}

/// Largest observed `||h(z) - phi^{-1} S(z) phi||` over the sampled
/// parameters — how well a claimed conjugated family tracks the original.
pub fn conjugation_defect(
    original: &CRegGroup,
    conjugated: &CRegGroup,
    phi: &Operator,
    samples: &[Complex64],
) -> Result<f64, GroupError> {
    let p = phi.materialize()?;
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or(GroupError::NotInvertible { defect: f64::INFINITY })?;
    let mut max_defect = 0.0_f64;
    for &z in samples {
        let h = conjugated.evaluate(z)?.materialize()?;
        let transported = &p_inv * original.evaluate(z)?.materialize()? * &p;
        max_defect = max_defect.max(spectral_upper(&(h - transported))?);
    }
    Ok(max_defect)
}

fn spectral_upper(m: &nalgebra::DMatrix<Complex64>) -> Result<f64, GroupError> {
    let est = linalg::spectral_norm(m)
        .map_err(|stall| OperatorError::NonConvergence { iterations: stall.iterations })?;
    Ok(est.value + est.error_bound)
}
