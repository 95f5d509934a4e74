//! Chebyshev expansion of `exp(−iHΔ)ψ` for sparse Hermitian `H`.
//!
//! With the spectrum of `H` inside `[c − r, c + r]`,
//! `exp(−iHΔ) = e^{−icΔ} Σ_k (2 − δ_k0)(−i)^k J_k(rΔ) T_k((H − c)/r)`.
//! The expansion is exact up to the truncation of the Bessel tail, which is
//! cut once `|J_k| < tol` past `k > rΔ`.

use num_complex::Complex64;

use crate::sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default truncation threshold for the Bessel coefficients.
pub const DEFAULT_TOL: f64 = 1e-16;

/// `J_0(x) … J_K(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`. The sequence is cut after the last `k > x` where
/// `|J_k| ≥ tol`.
pub fn bessel_j_sequence(x: f64, tol: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "Bessel argument must be finite and non-negative");
    if x == 0.0 {
        return vec![1.0];
    }
    let est = (x + 10.0 * x.cbrt() + 25.0).ceil() as usize;
    let start = est + 20 + (est % 2);
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-30;
    for k in (1..=start).rev() {
        j[k - 1] = (2.0 * k as f64 / x) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e200 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-200;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in j.iter_mut() {
        *v /= norm;
    }
    let floor = x.ceil() as usize;
    let mut last = floor.min(j.len() - 1);
    for (k, v) in j.iter().enumerate().skip(floor) {
        if v.abs() >= tol {
            last = k;
        }
    }
    j.truncate(last + 1);
    j
}

/// Expansion coefficients `(2 − δ_k0)(−i)^k J_k(x)`.
pub fn expansion_coefficients(x: f64, tol: f64) -> Vec<Complex64> {
    bessel_j_sequence(x, tol)
        .into_iter()
        .enumerate()
        .map(|(k, jk)| {
            let w = if k == 0 { 1.0 } else { 2.0 };
            let phase = match k % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            };
            phase * (w * jk)
        })
        .collect()
}

/// Spectral enclosure used to map `H` into `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub centre: f64,
    pub radius: f64,
}

impl SpectralBounds {
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        let pad = 1e-9 * (hi - lo).abs().max(lo.abs().max(hi.abs())).max(1e-300);
        let (lo, hi) = (lo - pad, hi + pad);
        Self {
            centre: 0.5 * (lo + hi),
            radius: 0.5 * (hi - lo),
        }
    }
}

/// Reusable scratch space for [`propagate_cols`].
#[derive(Debug, Default)]
pub struct Workspace {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    acc: Vec<Complex64>,
}

/// `ψ ← exp(−i(H + diag(d))Δ) ψ` in place, for `ncols` column-major vectors.
///
/// `extra_diag` is a real diagonal added to `h` (empty for none). `coeffs` must
/// come from [`expansion_coefficients`] at `x = bounds.radius · Δ`.
#[allow(clippy::too_many_arguments)]
pub fn propagate_cols(
    h: &CsrMatrix,
    extra_diag: &[f64],
    bounds: SpectralBounds,
    dt: f64,
    coeffs: &[Complex64],
    psi: &mut [Complex64],
    ncols: usize,
    ws: &mut Workspace,
) {
    let n = h.nrows();
    assert_eq!(psi.len(), n * ncols);
    assert!(extra_diag.is_empty() || extra_diag.len() == n);
    let global = Complex64::from_polar(1.0, -bounds.centre * dt);
    if coeffs.len() == 1 || bounds.radius == 0.0 {
        let s = global * coeffs[0];
        psi.iter_mut().for_each(|z| *z *= s);
        return;
    }
    let inv_r = 1.0 / bounds.radius;
    let shift: Vec<f64> = (0..n)
        .map(|i| extra_diag.get(i).copied().unwrap_or(0.0) - bounds.centre)
        .collect();

    ws.prev.clear();
    ws.prev.extend_from_slice(psi);
    ws.cur.resize(n * ncols, ZERO);
    ws.acc.resize(n * ncols, ZERO);

    // T_1 ψ and the first two terms of the sum.
    for col in 0..ncols {
        let base = col * n;
        let x = &ws.prev[base..base + n];
        for r in 0..n {
            let (cols, vals) = h.row(r);
            let mut s = Complex64::new(shift[r], 0.0) * x[r];
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            ws.cur[base + r] = s * inv_r;
            ws.acc[base + r] = coeffs[0] * x[r] + coeffs[1] * ws.cur[base + r];
        }
    }

    for &ck in &coeffs[2..] {
        // prev ← 2 H̃ cur − prev, then swap so that cur holds T_k ψ.
        for col in 0..ncols {
            let base = col * n;
            let cur = &ws.cur[base..base + n];
            let prev = &mut ws.prev[base..base + n];
            let acc = &mut ws.acc[base..base + n];
            for r in 0..n {
                let (cols, vals) = h.row(r);
                let mut s = Complex64::new(shift[r], 0.0) * cur[r];
                for (&c, &v) in cols.iter().zip(vals) {
                    s += v * cur[c];
                }
                let next = s * (2.0 * inv_r) - prev[r];
                prev[r] = next;
                acc[r] += ck * next;
            }
        }
        std::mem::swap(&mut ws.prev, &mut ws.cur);
    }

    for (z, a) in psi.iter_mut().zip(&ws.acc) {
        *z = global * a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::expm;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bessel_matches_reference_values() {
        let cases = [
            (1.0, 0, 0.7651976865579666),
            (1.0, 1, 0.44005058574493355),
            (10.0, 0, -0.24593576445134832),
            (10.0, 5, -0.2340615281867936),
            (100.0, 0, 0.01998585030422312),
            (100.0, 1, -0.07714535201411214),
            (500.0, 480, -0.0663589004553744),
            (1000.0, 0, 0.024786686152420172),
            (1000.0, 999, 0.04883022877022191),
            (1000.0, 1020, 0.0019169670396724152),
            (0.03, 3, 5.624683600869046e-07),
        ];
        for (x, k, want) in cases {
            let j = bessel_j_sequence(x, 1e-30);
            let got = j[k];
            assert!((got - want).abs() < 1e-13 + 1e-10 * want.abs(), "J_{k}({x}) = {got} vs {want}");
        }
    }

    #[test]
    fn bessel_sum_rule() {
        for x in [0.1, 3.0, 47.5, 800.0] {
            let j = bessel_j_sequence(x, 1e-18);
            let s: f64 = j[0] * j[0] + 2.0 * j.iter().skip(1).map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-12, "x = {x}: {s}");
        }
    }

    fn random_hermitian(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, Complex64::new(rng.gen_range(-3.0..3.0), 0.0)));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    t.push((i, j, v));
                    t.push((j, i, v.conj()));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn matches_dense_exponential() {
        let n = 40;
        let h = random_hermitian(n, 3);
        let diag: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let mut full = h.to_dense();
        for i in 0..n {
            full[(i, i)] += Complex64::new(diag[i], 0.0);
        }
        let (lo, hi) = h.gershgorin_interval();
        let bounds = SpectralBounds::from_interval(lo, hi + 0.1 * (n - 1) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut psi: Vec<Complex64> = (0..2 * n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let orig = psi.clone();
        for &dt in &[0.013, 2.5, 40.0] {
            psi.copy_from_slice(&orig);
            let coeffs = expansion_coefficients(bounds.radius * dt, DEFAULT_TOL);
            let mut ws = Workspace::default();
            propagate_cols(&h, &diag, bounds, dt, &coeffs, &mut psi, 2, &mut ws);
            let u = expm(&full.scale(-dt).map(|z| z * Complex64::new(0.0, 1.0))).unwrap();
            for col in 0..2 {
                let x = DVector::from_column_slice(&orig[col * n..(col + 1) * n]);
                let want = &u * x;
                let got = DVector::from_column_slice(&psi[col * n..(col + 1) * n]);
                assert!((want - got).norm() < 1e-11, "dt = {dt}");
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let h = random_hermitian(10, 9);
        let (lo, hi) = h.gershgorin_interval();
        let b = SpectralBounds::from_interval(lo, hi);
        let coeffs = expansion_coefficients(0.0, DEFAULT_TOL);
        let mut psi = vec![Complex64::new(0.3, -0.1); 10];
        let orig = psi.clone();
        propagate_cols(&h, &[], b, 0.0, &coeffs, &mut psi, 1, &mut Workspace::default());
        assert_eq!(psi, orig);
    }
}
