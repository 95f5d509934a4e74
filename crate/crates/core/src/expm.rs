//! Dense matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham 2005).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::{matmul, solve};
use crate::error::{Error, Result};

const THETA_13: f64 = 5.371920351148152;
const PADE_13: [f64; 14] = [
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

/// Inputs with a larger 1-norm are rejected: the squaring phase would need
/// more than ~60 steps and the accumulated rounding is no longer controlled.
pub const MAX_NORM: f64 = 1e18;

pub fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn expm(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() || norm > MAX_NORM {
        return Err(Error::NormOverflow { norm });
    }
    if n == 0 {
        return Ok(a.clone());
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(s));
    let b = |k: usize| Complex64::new(PADE_13[k], 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = matmul(&a, &a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = matmul(&a, &(matmul(&a6, &inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1)));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = matmul(&a6, &inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p).map_err(|_| Error::InternalConsistency("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NormOverflow { norm });
    }
    Ok(r)
}
