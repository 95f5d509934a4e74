//! Exact propagation under a time-independent Hermitian generator by dense
//! diagonalization of each connected block of its sparsity graph.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dense::{adjoint_matmul, matmul};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Largest block diagonalized densely.
pub const MAX_BLOCK: usize = 2048;

/// Eigen-decomposition of a dense Hermitian matrix by LAPACK `zheevr`.
/// The divide-and-conquer driver is avoided: some system builds return
/// eigenvectors with O(1) residuals once the dimension passes a few hundred.
fn hermitian_eigen(m: DMatrix<Complex64>) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let ni = i32::try_from(n).map_err(|_| Error::LayoutTooLarge { dim: n, limit: MAX_BLOCK })?;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = (&m + m.adjoint()).scale(0.5);
    let mut w = vec![0.0; n];
    let mut z = vec![zero; n * n];
    let mut isuppz = vec![0i32; 2 * n];
    let mut found = 0;
    let mut info = 0;
    let (mut wq, mut rq, mut iq) = ([zero], [0.0], [0i32]);
    // SAFETY: every buffer is sized as the LAPACK documentation requires.
    unsafe {
        lapack::zheevr(
            b'V', b'A', b'L', ni, a.as_mut_slice(), ni, 0.0, 0.0, 0, 0, 0.0, &mut found, &mut w, &mut z, ni,
            &mut isuppz, &mut wq, -1, &mut rq, -1, &mut iq, -1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::InternalConsistency(format!("zheevr workspace query failed (info {info})")));
    }
    let (lw, lr, li) = (wq[0].re as i32, rq[0] as i32, iq[0]);
    let mut work = vec![zero; lw.max(1) as usize];
    let mut rwork = vec![0.0; lr.max(1) as usize];
    let mut iwork = vec![0i32; li.max(1) as usize];
    // SAFETY: as above, with the queried workspace sizes.
    unsafe {
        lapack::zheevr(
            b'V', b'A', b'L', ni, a.as_mut_slice(), ni, 0.0, 0.0, 0, 0, 0.0, &mut found, &mut w, &mut z, ni,
            &mut isuppz, &mut work, lw, &mut rwork, lr, &mut iwork, li, &mut info,
        );
    }
    if info != 0 || found != ni {
        return Err(Error::InternalConsistency(format!("zheevr failed (info {info}, {found} of {n} eigenpairs)")));
    }
    Ok((DVector::from_vec(w), DMatrix::from_vec(n, n, z)))
}

#[derive(Debug, Clone)]
struct Block {
    idx: Vec<usize>,
    vecs: DMatrix<Complex64>,
    vals: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    dim: usize,
    blocks: Vec<Block>,
}

impl SpectralPropagator {
    pub fn new(h: &CsrMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::InvalidParameter("generator must be square".into()));
        }
        let defect = h.hermiticity_defect();
        if defect > 1e-12 * h.max_abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("generator is not Hermitian (defect {defect:e})")));
        }
        let comps = h.connected_components();
        if let Some(big) = comps.iter().map(|c| c.len()).max().filter(|&n| n > MAX_BLOCK) {
            return Err(Error::LayoutTooLarge {
                dim: big,
                limit: MAX_BLOCK,
            });
        }
        let blocks = comps
            .into_iter()
            .map(|idx| {
                let (vals, vecs) = hermitian_eigen(h.dense_block(&idx))?;
                Ok(Block { idx, vecs, vals })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: h.nrows(), blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.idx.len()).max().unwrap_or(0)
    }

    /// `ψ ← exp(−iHt) ψ` for `ncols` column-major vectors.
    pub fn apply(&self, t: f64, psi: &mut [Complex64], ncols: usize) {
        assert_eq!(psi.len(), self.dim * ncols);
        for b in &self.blocks {
            let nb = b.idx.len();
            let mut x = DMatrix::<Complex64>::zeros(nb, ncols);
            for col in 0..ncols {
                for (k, &i) in b.idx.iter().enumerate() {
                    x[(k, col)] = psi[col * self.dim + i];
                }
            }
            let mut c = adjoint_matmul(&b.vecs, &x);
            for (k, mut row) in c.row_iter_mut().enumerate() {
                let ph = Complex64::from_polar(1.0, -b.vals[k] * t);
                row.iter_mut().for_each(|z| *z *= ph);
            }
            let y = matmul(&b.vecs, &c);
            for col in 0..ncols {
                for (k, &i) in b.idx.iter().enumerate() {
                    psi[col * self.dim + i] = y[(k, col)];
                }
            }
        }
    }

    /// `max_b |H_b V_b − V_b Λ_b|`, a check of the decomposition.
    pub fn residual(&self, h: &CsrMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for b in &self.blocks {
            let m = h.dense_block(&b.idx);
            let lam = DMatrix::from_diagonal(&b.vals.map(|v| Complex64::new(v, 0.0)));
            worst = worst.max((&m * &b.vecs - &b.vecs * lam).camax());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::expm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block_hermitian(seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let mut trip = Vec::new();
        // Two disconnected blocks: {0..5} and {5..12}.
        for (lo, hi) in [(0, 5), (5, 12)] {
            for r in lo..hi {
                trip.push((r, r, Complex64::new(rng.gen_range(-3.0..3.0), 0.0)));
                for c in r + 1..hi {
                    if rng.gen_bool(0.5) {
                        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        trip.push((r, c, z));
                        trip.push((c, r, z.conj()));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n, n, trip)
    }

    #[test]
    fn matches_dense_exponential() {
        let h = random_block_hermitian(1);
        let sp = SpectralPropagator::new(&h).unwrap();
        assert!(sp.residual(&h) < 1e-12);
        assert!(sp.largest_block() <= 7);
        let t = 0.7;
        let u = expm(&h.to_dense().scale(-t).map(|z| z * Complex64::new(0.0, 1.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut psi: Vec<Complex64> = (0..24)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let want0 = &u * DVector::from_column_slice(&psi[..12]);
        let want1 = &u * DVector::from_column_slice(&psi[12..]);
        sp.apply(t, &mut psi, 2);
        for k in 0..12 {
            assert!((psi[k] - want0[k]).norm() < 1e-12);
            assert!((psi[12 + k] - want1[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = CsrMatrix::from_triplets(2, 2, vec![(0, 1, Complex64::new(1.0, 0.0))]);
        assert!(SpectralPropagator::new(&h).is_err());
    }
}
