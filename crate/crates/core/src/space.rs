//! Vectors, norms, balls, and deterministic sampling in `C^n`.
//!
//! Vectors are immutable value types: every operation returns a fresh
//! `Vector`, and two vectors compare equal exactly when their coordinates do.
//! The Euclidean norm is the default geometry; the sup norm is available for
//! residual reporting, but the exact ball-return solver only speaks `p = 2`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on the number of lattice points [`grid_points`] will produce.
pub const GRID_POINT_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("vector must have at least one coordinate")]
    EmptyVector,
    #[error("coordinate {index} is not finite")]
    NonFiniteCoordinate { index: usize },
    #[error("ball radius must be finite and nonnegative, got {radius}")]
    BadRadius { radius: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid would contain {requested} points, cap is {cap}")]
    GridTooLarge { requested: u128, cap: u64 },
    #[error("grid needs at least one point per axis")]
    EmptyGrid,
}

/// Which norm to measure with: `p = 2` or `p = infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    LInf,
}

impl Serialize for NormKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NormKind::L2 => s.serialize_u64(2),
            NormKind::LInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct KindVisitor;
        impl<'de> Visitor<'de> for KindVisitor {
            type Value = NormKind;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("the number 2 or the string \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<NormKind, E> {
                if v == 2 {
                    Ok(NormKind::L2)
                } else {
                    Err(E::custom(format!("unsupported norm p = {v}")))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<NormKind, E> {
                self.visit_u64(v as u64)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<NormKind, E> {
                if v == 2.0 {
                    Ok(NormKind::L2)
                } else {
                    Err(E::custom(format!("unsupported norm p = {v}")))
                }
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<NormKind, E> {
                match v {
                    "inf" | "Inf" | "INF" => Ok(NormKind::LInf),
                    "2" => Ok(NormKind::L2),
                    other => Err(E::custom(format!("unsupported norm \"{other}\""))),
                }
            }
        }
        d.deserialize_any(KindVisitor)
    }
}

/// Immutable vector in `C^n`, `n >= 1`, all coordinates finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    coords: Vec<Complex64>,
}

impl Vector {
    pub fn new(coords: Vec<Complex64>) -> Result<Self, SpaceError> {
        if coords.is_empty() {
            return Err(SpaceError::EmptyVector);
        }
        for (index, c) in coords.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(SpaceError::NonFiniteCoordinate { index });
            }
        }
        Ok(Vector { coords })
    }

    /// Vector with the given real coordinates (imaginary parts zero).
    pub fn from_real(coords: &[f64]) -> Result<Self, SpaceError> {
        Vector::new(coords.iter().map(|&re| Complex64::new(re, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "zero-dimensional vectors are not supported");
        Vector {
            coords: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// Standard basis vector with a 1 in position `index` (0-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut v = Vector::zeros(dim);
        v.coords[index] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::L2 => {
                let mut sum = 0.0;
                for c in &self.coords {
                    sum += c.norm_sqr();
                }
                sum.sqrt()
            }
            NormKind::LInf => self.coords.iter().map(|c| c.norm()).fold(0.0, f64::max),
        }
    }

    pub fn dist(&self, other: &Vector, kind: NormKind) -> f64 {
        self.sub(other).norm(kind)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in add");
        Vector {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in sub");
        Vector {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, a: Complex64) -> Vector {
        Vector {
            coords: self.coords.iter().map(|c| a * c).collect(),
        }
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.coords)
    }

    pub fn from_dvector(v: &DVector<Complex64>) -> Result<Self, SpaceError> {
        Vector::new(v.iter().copied().collect())
    }

    /// Concatenate several vectors into one block vector.
    pub fn concat(parts: &[Vector]) -> Result<Self, SpaceError> {
        let mut coords = Vec::new();
        for p in parts {
            coords.extend_from_slice(&p.coords);
        }
        Vector::new(coords)
    }
}

/// Wire format for bare complex lists: arrays of [re, im] pairs, the same
/// convention as [`Vector`]. Use via `#[serde(with = "...")]`.
pub mod complex_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(points: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(points.len()))?;
        for c in points {
            seq.serialize_element(&[c.re, c.im])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

// Wire format: a vector is an array of [re, im] pairs.
impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.coords.len()))?;
        for c in &self.coords {
            seq.serialize_element(&[c.re, c.im])?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct VecVisitor;
        impl<'de> Visitor<'de> for VecVisitor {
            type Value = Vector;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a nonempty array of [re, im] pairs")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vector, A::Error> {
                let mut coords = Vec::new();
                while let Some([re, im]) = seq.next_element::<[f64; 2]>()? {
                    coords.push(Complex64::new(re, im));
                }
                Vector::new(coords).map_err(de::Error::custom)
            }
        }
        d.deserialize_seq(VecVisitor)
    }
}

/// Closed ball `{ x : ||x - center|| <= radius }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self, SpaceError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(SpaceError::BadRadius { radius });
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &Vector, kind: NormKind) -> bool {
        x.dist(&self.center, kind) <= self.radius
    }
}

impl<'de> Deserialize<'de> for Ball {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            center: Vector,
            radius: f64,
        }
        let raw = Raw::deserialize(d)?;
        Ball::new(raw.center, raw.radius).map_err(de::Error::custom)
    }
}

/// Deterministic sample source. The same `(seed, stream)` pair always
/// reproduces the same sequence; distinct streams from one seed are
/// independent for practical purposes.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler { rng }
    }

    /// Standard complex Gaussian: independent `N(0, 1)` real and imaginary parts.
    pub fn standard_complex(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re, im)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn uniform_usize(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }
}

/// Draw a point uniformly from the closed Euclidean ball `b`.
///
/// Direction comes from a normalized complex Gaussian; the radius uses the
/// inverse-CDF scaling `u^(1/(2n))` (a complex `n`-ball has 2n real
/// dimensions). Membership is enforced exactly even under rounding.
pub fn sample_in_ball(b: &Ball, sampler: &mut Sampler) -> Vector {
    let dim = b.dim();
    let mut dir: Vec<Complex64>;
    let mut norm;
    loop {
        dir = (0..dim).map(|_| sampler.standard_complex()).collect();
        norm = dir.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            break;
        }
        // astronomically unlikely, but a zero draw would divide by zero
    }
    let u = sampler.uniform();
    let radius = b.radius() * u.powf(1.0 / (2.0 * dim as f64));
    let scale = radius / norm;
    let mut coords: Vec<Complex64> = b
        .center()
        .coords()
        .iter()
        .zip(&dir)
        .map(|(c, d)| c + d * scale)
        .collect();
    // The scaling above lands within the ball up to rounding; pull any
    // straggler back inside so the membership contract is unconditional.
    let mut point = Vector { coords: coords.clone() };
    let mut guard = 0;
    while point.dist(b.center(), NormKind::L2) > b.radius() && guard < 8 {
        for (p, c) in coords.iter_mut().zip(b.center().coords()) {
            *p = c + (*p - c) * 0.999_999_999_999_999;
        }
        point = Vector { coords: coords.clone() };
        guard += 1;
    }
    point
}

/// Deterministic lattice of points inside `b`, gridding real and imaginary
/// parts with `per_axis` values per axis. The center is always included.
///
/// Axis offsets are scaled by `1/sqrt(2 dim)` so that every lattice corner
/// stays inside the Euclidean ball; the point order is the odometer order of
/// the axis indices (last axis fastest) and is bit-stable across runs.
pub fn grid_points(b: &Ball, per_axis: usize) -> Result<Vec<Vector>, SpaceError> {
    if per_axis == 0 {
        return Err(SpaceError::EmptyGrid);
    }
    let dim = b.dim();
    let axes = 2 * dim;
    let mut requested: u128 = 1;
    for _ in 0..axes {
        requested = requested.saturating_mul(per_axis as u128);
        if requested > GRID_POINT_CAP as u128 {
            return Err(SpaceError::GridTooLarge {
                requested,
                cap: GRID_POINT_CAP,
            });
        }
    }

    // Half-width per real axis; the tiny shave keeps corner points strictly
    // inside the ball under rounding.
    let half = b.radius() * (1.0 - 1e-12) / (axes as f64).sqrt();
    let offsets: Vec<f64> = if per_axis == 1 {
        vec![0.0]
    } else {
        let step = 2.0 * half / (per_axis - 1) as f64;
        (0..per_axis).map(|i| -half + step * i as f64).collect()
    };

    let mut points = Vec::with_capacity(requested as usize);
    if per_axis % 2 == 0 {
        // even grids have no zero offset, so the center is added up front
        points.push(b.center().clone());
    }
    let mut idx = vec![0usize; axes];
    loop {
        let coords: Vec<Complex64> = (0..dim)
            .map(|i| {
                let c = b.center().coords()[i];
                Complex64::new(c.re + offsets[idx[2 * i]], c.im + offsets[idx[2 * i + 1]])
            })
            .collect();
        let point = Vector { coords };
        if point.dist(b.center(), NormKind::L2) <= b.radius() {
            points.push(point);
        }
        // odometer increment, last axis fastest
        let mut axis = axes;
        loop {
            if axis == 0 {
                return Ok(points);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
}
