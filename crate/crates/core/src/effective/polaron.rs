//! Numerical check of the polaron (Lang-Firsov) transformation
//! `U = e^S`, `S = Σ_in (F*_in/2δ_n) σ_i^x a_n† − h.c.`
//!
//! Writing `Θ̂_i = Σ_m (F_im a_m − F*_im a_m†)/2δ_m`, so that `S = −Σ_i σ_i^x Θ̂_i`,
//! the transformation acts as
//!
//! * `U a_n U† = a_n − Σ_j (F*_jn/2δ_n) σ_j^x`
//! * `U σ_i^y U† = cosh(2Θ̂_i) σ_i^y − i sinh(2Θ̂_i) σ_i^z`
//!
//! The second line follows from `σ^x σ^y = −σ^y σ^x`, which turns
//! `e^{−σ^x Θ̂} σ^y e^{σ^x Θ̂}` into `e^{−2σ^x Θ̂} σ^y`. The report also carries
//! the residual of the single-angle form `cosh(Θ̂) σ^y − i sinh(Θ̂) σ^z`,
//! which differs at first order in `|F/δ|`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::matmul;
use crate::error::{Error, Result};
use crate::expm::expm;
use crate::hamiltonian::SidebandCouplings;
use crate::operators::{boson, pauli, BosonKind, PauliAxis, SpaceLayout};

/// Extra Fock levels used for the matrix functions beyond the requested cutoff.
pub const DEFAULT_HEADROOM: usize = 8;
/// Largest working dimension accepted.
pub const MAX_POLARON_DIM: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct PolaronReport {
    pub n_max: usize,
    pub headroom: usize,
    /// Number of basis states with every occupation `≤ n_max − 2`.
    pub interior_states: usize,
    /// `max |U a_n U† − (a_n − Σ_j F*_jn σ_j^x/2δ_n)|` on the interior.
    pub displacement_residual: f64,
    /// Interior residual of the `cosh(2Θ̂)` form.
    pub spin_residual: f64,
    /// Interior residual of the `cosh(Θ̂)` form.
    pub spin_residual_single_angle: f64,
    /// `max(|C − C†|, |S + S†|)` for `C = cosh Θ̂`, `S = sinh Θ̂`.
    pub parity_defect: f64,
}

fn cosh_sinh(a: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let ep = expm(a)?;
    let em = expm(&(-a))?;
    Ok(((&ep + &em).scale(0.5), (ep - em).scale(0.5)))
}

fn interior_max(m: &DMatrix<Complex64>, interior: &[usize]) -> f64 {
    let mut worst = 0.0_f64;
    for &r in interior {
        for &c in interior {
            worst = worst.max(m[(r, c)].norm());
        }
    }
    worst
}

/// Builds the operators on a working space with `headroom` extra Fock levels
/// and measures residuals on states with all occupations `≤ layout.n_max − 2`.
pub fn polaron_transform_check(c: &SidebandCouplings, layout: &SpaceLayout, headroom: usize) -> Result<PolaronReport> {
    if layout.num_qubits() != c.num_ions() || layout.num_modes() != c.num_modes() {
        return Err(Error::InvalidParameter("layout does not match the coupling table".into()));
    }
    if layout.n_max() < 2 {
        return Err(Error::InvalidParameter("polaron check needs n_max >= 2".into()));
    }
    let work = SpaceLayout::new(layout.num_qubits(), layout.num_modes(), layout.n_max() + headroom)?;
    if work.dim() > MAX_POLARON_DIM {
        return Err(Error::LayoutTooLarge {
            dim: work.dim(),
            limit: MAX_POLARON_DIM,
        });
    }
    for (mode, &d) in c.delta.iter().enumerate() {
        if d == 0.0 {
            return Err(Error::Resonance { mode, detuning: d });
        }
    }
    let dim = work.dim();
    let ni = c.num_ions();
    let nm = c.num_modes();
    let a: Vec<DMatrix<Complex64>> = (0..nm)
        .map(|n| boson(&work, n, BosonKind::Annihilate).map(|o| o.to_dense()))
        .collect::<Result<_>>()?;
    let dense = |q: usize, ax: PauliAxis| pauli(&work, q, ax).map(|o| o.to_dense());
    let sx: Vec<_> = (0..ni).map(|i| dense(i, PauliAxis::X)).collect::<Result<_>>()?;
    let sy: Vec<_> = (0..ni).map(|i| dense(i, PauliAxis::Y)).collect::<Result<_>>()?;
    let sz: Vec<_> = (0..ni).map(|i| dense(i, PauliAxis::Z)).collect::<Result<_>>()?;

    let theta: Vec<DMatrix<Complex64>> = (0..ni)
        .map(|i| {
            let mut t = DMatrix::<Complex64>::zeros(dim, dim);
            for m in 0..nm {
                let g = c.f[(i, m)] / (2.0 * c.delta[m]);
                t += &a[m] * g - a[m].adjoint() * g.conj();
            }
            t
        })
        .collect();
    let mut s = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..ni {
        s -= matmul(&sx[i], &theta[i]);
    }
    let u = expm(&s)?;
    let ud = u.adjoint();

    let pd = work.phonon_dim();
    let edge = layout.n_max() - 2;
    let interior: Vec<usize> = (0..dim)
        .filter(|idx| work.phonon_occupations(idx % pd).iter().all(|&k| k <= edge))
        .collect();

    let mut displacement_residual = 0.0_f64;
    for n in 0..nm {
        let lhs = matmul(&matmul(&u, &a[n]), &ud);
        let mut rhs = a[n].clone();
        for j in 0..ni {
            rhs -= &sx[j] * (c.f[(j, n)].conj() / (2.0 * c.delta[n]));
        }
        displacement_residual = displacement_residual.max(interior_max(&(lhs - rhs), &interior));
    }

    let minus_i = Complex64::new(0.0, -1.0);
    let mut spin_residual = 0.0_f64;
    let mut spin_residual_single_angle = 0.0_f64;
    let mut parity_defect = 0.0_f64;
    for i in 0..ni {
        let lhs = matmul(&matmul(&u, &sy[i]), &ud);
        let (c2, s2) = cosh_sinh(&theta[i].scale(2.0))?;
        let exact = matmul(&c2, &sy[i]) + matmul(&s2, &sz[i]) * minus_i;
        spin_residual = spin_residual.max(interior_max(&(&lhs - exact), &interior));
        let (c1, s1) = cosh_sinh(&theta[i])?;
        let single = matmul(&c1, &sy[i]) + matmul(&s1, &sz[i]) * minus_i;
        spin_residual_single_angle = spin_residual_single_angle.max(interior_max(&(&lhs - single), &interior));
        parity_defect = parity_defect
            .max((&c1 - c1.adjoint()).camax())
            .max((&s1 + s1.adjoint()).camax());
    }

    Ok(PolaronReport {
        n_max: layout.n_max(),
        headroom,
        interior_states: interior.len(),
        displacement_residual,
        spin_residual,
        spin_residual_single_angle,
        parity_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(ratio: f64) -> SidebandCouplings {
        let delta = 2.0 * std::f64::consts::PI * 8e5;
        SidebandCouplings {
            f: DMatrix::from_element(1, 1, Complex64::new(0.0, 2.0 * ratio * delta)),
            delta: vec![delta],
            eta_n: vec![0.2],
            mode_frequencies: vec![1.0],
        }
    }

    #[test]
    fn zero_coupling_is_identity() {
        let l = SpaceLayout::new(1, 1, 4).unwrap();
        let r = polaron_transform_check(&single(0.0), &l, 0).unwrap();
        assert_eq!(r.displacement_residual, 0.0);
        assert_eq!(r.spin_residual, 0.0);
        assert_eq!(r.spin_residual_single_angle, 0.0);
    }

    #[test]
    fn identities_hold_with_headroom() {
        let l = SpaceLayout::new(1, 1, 8).unwrap();
        let r = polaron_transform_check(&single(0.05), &l, DEFAULT_HEADROOM).unwrap();
        assert!(r.displacement_residual < 1e-8, "{r:?}");
        assert!(r.spin_residual < 1e-8, "{r:?}");
        assert!(r.parity_defect < 1e-12);
        // The single-angle form misses at first order in |F/δ|.
        assert!(r.spin_residual_single_angle > 1e-2);
        assert_eq!(r.interior_states, 2 * 7);
    }

    #[test]
    fn cutoff_edge_contaminates_displacement_without_headroom() {
        let l = SpaceLayout::new(1, 1, 8).unwrap();
        let bare = polaron_transform_check(&single(0.05), &l, 0).unwrap();
        assert!(bare.displacement_residual > 1e-7);
        assert!(bare.spin_residual < 1e-12);
    }

    #[test]
    fn refuses_large_layouts() {
        let c = SidebandCouplings {
            f: DMatrix::from_element(2, 2, Complex64::new(0.0, 1e4)),
            delta: vec![1e6, 1.1e6],
            eta_n: vec![0.2, 0.2],
            mode_frequencies: vec![1.0, 1.0],
        };
        let l = SpaceLayout::new(2, 2, 20).unwrap();
        assert!(matches!(
            polaron_transform_check(&c, &l, 8),
            Err(Error::LayoutTooLarge { .. })
        ));
    }
}
