//! Dense complex products and solves through BLAS/LAPACK.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

fn dim(n: usize) -> i32 {
    i32::try_from(n).expect("matrix dimension exceeds the BLAS index range")
}

fn gemm(trans_a: u8, a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (m, k) = if trans_a == b'N' { (a.nrows(), a.ncols()) } else { (a.ncols(), a.nrows()) };
    assert_eq!(k, b.nrows(), "inner dimensions differ");
    let n = b.ncols();
    let mut c = DMatrix::<Complex64>::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    // SAFETY: column-major buffers whose sizes match the passed dimensions.
    unsafe {
        blas::zgemm(
            trans_a,
            b'N',
            dim(m),
            dim(n),
            dim(k),
            one,
            a.as_slice(),
            dim(a.nrows()),
            b.as_slice(),
            dim(k),
            zero,
            c.as_mut_slice(),
            dim(m),
        );
    }
    c
}

/// `a · b`.
pub fn matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    gemm(b'N', a, b)
}

/// `a† · b`.
pub fn adjoint_matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    gemm(b'C', a, b)
}

/// `a⁻¹ · b` by LU with partial pivoting.
pub fn solve(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    assert!(a.is_square() && a.nrows() == b.nrows(), "solve needs a square system");
    let n = a.nrows();
    let mut lu = a.clone();
    let mut x = b.clone();
    if n == 0 || b.ncols() == 0 {
        return Ok(x);
    }
    let mut ipiv = vec![0i32; n];
    let mut info = 0;
    // SAFETY: column-major buffers whose sizes match the passed dimensions.
    unsafe {
        lapack::zgesv(
            dim(n),
            dim(b.ncols()),
            lu.as_mut_slice(),
            dim(n),
            &mut ipiv,
            x.as_mut_slice(),
            dim(n),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::InternalConsistency(format!("zgesv failed with info {info}")));
    }
    Ok(x)
}
