//! Shared dense kernels: spectral-norm estimation, matrix exponential, and
//! a couple of solve helpers. Everything here works on `DMatrix<Complex64>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::space::Sampler;

/// Iteration cap for the Gram power iteration.
pub(crate) const POWER_ITER_CAP: usize = 10_000;
/// Relative stall tolerance on the Rayleigh quotient.
const POWER_ITER_RTOL: f64 = 1e-10;

/// Largest singular value estimated by power iteration, with a residual-based
/// error bound. `value` is always a true lower bound on the 2-norm (it is the
/// norm of `M v` for a unit vector `v`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct SpectralEstimate {
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerIterationStall {
    pub iterations: usize,
}

/// Power iteration on the Gram matrix `M^H M` from a fixed seeded start, so
/// results are identical across runs and thread counts.
pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> Result<SpectralEstimate, PowerIterationStall> {
    let n = m.ncols();
    let mut s = Sampler::new(0x5EED_CAFE, 0);
    let mut v = DVector::from_fn(n, |_, _| s.standard_complex());
    let vn = v.norm();
    // a Gaussian draw is never exactly zero, but stay defensive
    if vn == 0.0 {
        v = DVector::from_element(n, Complex64::new(1.0, 0.0));
    }
    v /= Complex64::from(v.norm());

    let mut theta_prev = f64::NEG_INFINITY;
    for _ in 0..POWER_ITER_CAP {
        let mv = m * &v;
        let theta = mv.norm_squared(); // Rayleigh quotient of the Gram matrix
        if theta == 0.0 {
            return Ok(SpectralEstimate {
                value: 0.0,
                error_bound: 0.0,
            });
        }
        let gv = m.ad_mul(&mv); // M^H (M v)
        if (theta - theta_prev).abs() <= POWER_ITER_RTOL * theta {
            let resid = (&gv - &v * Complex64::from(theta)).norm();
            let value = theta.sqrt();
            let upper = (theta + resid).sqrt();
            return Ok(SpectralEstimate {
                value,
                error_bound: (upper - value).max(value * f64::EPSILON),
            });
        }
        theta_prev = theta;
        let gn = gv.norm();
        if gn == 0.0 {
            // v fell in the kernel of the Gram matrix; theta above was
            // nonzero so this cannot happen with exact arithmetic, restart
            v = DVector::from_fn(n, |_, _| s.standard_complex());
            v /= Complex64::from(v.norm());
            continue;
        }
        v = gv / Complex64::from(gn);
    }
    Err(PowerIterationStall {
        iterations: POWER_ITER_CAP,
    })
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Degree-13 diagonal Pade coefficients for exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. Returns `None` only if the internal solve degenerates, which
/// does not happen for finite input.
pub(crate) fn expm(a: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let norm = one_norm(a);
    let s = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / Complex64::from(2f64.powi(s as i32));

    let ident = DMatrix::<Complex64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = |k: usize| Complex64::from(PADE13[k]);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &ident * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &ident * b(0);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs.lu().solve(&rhs)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Some(r)
}

/// Minimum-norm least-squares solution of `m x ~ rhs` via SVD.
pub(crate) fn min_norm_lsq(m: &DMatrix<Complex64>, rhs: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let svd = m.clone().svd(true, true);
    svd.solve(rhs, 1e-13 * (1.0 + svd.singular_values.max())).ok()
}

/// Largest singular value via full SVD (used where an exact answer is worth
/// the cost, e.g. validating rank conditions).
pub(crate) fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}
