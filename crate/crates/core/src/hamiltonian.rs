//! Carrier, red-sideband and dephasing terms of the spin-phonon Hamiltonian.
//!
//! The time-dependent builders work in the interaction picture of the bare
//! qubits and phonons, where the sideband carries `e^{−iδ_n t}` per mode.
//! Propagation happens in the frame co-rotating with `Σ_n δ_n a_n†a_n`; there
//! the generator [`static_generator`] is time independent and a state maps
//! back through `ψ_I(t) = e^{i Σ δ_n n_n t} ψ_s(t)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::{NormalModes, TrapParams};
use crate::error::{Error, Result};
use crate::operators::{boson, pauli, BosonKind, OperatorMatrix, PauliAxis, SpaceLayout};
use crate::sparse::CsrMatrix;

const TWO_PI: f64 = 2.0 * PI;

/// Physical drive and trap parameters. Frequencies are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    /// Qubit splitting; only enters through the optional counter-rotating term.
    pub omega0: f64,
    pub omega_x: f64,
    pub omega_z: f64,
    /// Bare Lamb-Dicke parameter of the centre-of-mass mode.
    pub eta: f64,
    /// Signed detuning of the red sideband from the centre-of-mass mode.
    pub delta_l: f64,
    /// Two-photon Rabi frequency of the Raman pair.
    pub omega_l: f64,
    /// Carrier Rabi frequency.
    pub omega_d: f64,
    pub phi_l: f64,
    pub phi_d: f64,
    /// Static field in tesla, carried for bookkeeping.
    pub b0: f64,
}

impl LabParams {
    /// Reference setup: 1.8 GHz qubit, 4 MHz / 1 MHz trap, η = 0.2,
    /// δ_L = +800 kHz, Ω_L = 500 kHz, Ω_d = 5.2 MHz, B₀ = 4 mT.
    pub fn reference() -> Self {
        Self {
            omega0: TWO_PI * 1.8e9,
            omega_x: TWO_PI * 4e6,
            omega_z: TWO_PI * 1e6,
            eta: 0.2,
            delta_l: TWO_PI * 800e3,
            omega_l: TWO_PI * 500e3,
            omega_d: TWO_PI * 5.2e6,
            phi_l: 0.0,
            phi_d: 0.0,
            b0: 4e-3,
        }
    }

    pub fn trap(&self, num_ions: usize) -> Result<TrapParams> {
        TrapParams::new(num_ions, self.omega_x, self.omega_z)
    }

    /// Laser-qubit detuning `ω_L − ω₀ = δ_L − ω_x`.
    pub fn laser_qubit_detuning(&self) -> f64 {
        self.delta_l - self.omega_x
    }

    /// Whether `Ω_L < |ω_L − ω₀|`, the regime in which the sideband picture holds.
    pub fn sideband_regime_ok(&self) -> bool {
        self.omega_l < self.laser_qubit_detuning().abs()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega0, self.omega_x, self.omega_z, self.eta, self.delta_l, self.omega_l, self.omega_d, self.phi_l,
            self.phi_d, self.b0,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite lab parameter".into()));
        }
        if self.eta < 0.0 || self.omega_l < 0.0 || self.omega_d < 0.0 {
            return Err(Error::InvalidParameter("eta, Omega_L and Omega_d must be non-negative".into()));
        }
        self.trap(1).map(|_| ())
    }
}

/// Sideband coupling table `F_in` with per-mode detunings.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandCouplings {
    /// `f[(i, n)] = F_in = (i/2) Ω_L e^{iφ_L} η_n M_in`.
    pub f: DMatrix<Complex64>,
    /// `δ_n = δ_L + (ω_n − ω_x)`.
    pub delta: Vec<f64>,
    /// `η_n = η (ω_x/ω_n)^{1/2}`.
    pub eta_n: Vec<f64>,
    pub mode_frequencies: Vec<f64>,
}

impl SidebandCouplings {
    pub fn num_ions(&self) -> usize {
        self.f.nrows()
    }

    pub fn num_modes(&self) -> usize {
        self.f.ncols()
    }

    /// `max_in |F_in| / |δ_n|`, the small parameter of the effective model.
    pub fn coupling_ratio(&self) -> f64 {
        let mut worst = 0.0_f64;
        for n in 0..self.num_modes() {
            for i in 0..self.num_ions() {
                worst = worst.max(self.f[(i, n)].norm() / self.delta[n].abs());
            }
        }
        worst
    }

    /// Same couplings with the laser phase advanced by `chi`.
    pub fn with_extra_phase(&self, chi: f64) -> Self {
        let mut out = self.clone();
        let p = Complex64::from_polar(1.0, chi);
        out.f.iter_mut().for_each(|z| *z *= p);
        out
    }
}

pub fn sideband_couplings(params: &LabParams, modes: &NormalModes) -> Result<SidebandCouplings> {
    if (modes.omega_x - params.omega_x).abs() > 1e-9 * params.omega_x {
        return Err(Error::InvalidParameter(
            "normal modes were computed for a different radial frequency".into(),
        ));
    }
    let n = modes.num_modes();
    let prefactor = Complex64::new(0.0, 0.5 * params.omega_l) * Complex64::from_polar(1.0, params.phi_l);
    let eta_n: Vec<f64> = modes
        .frequencies
        .iter()
        .map(|w| params.eta * (params.omega_x / w).sqrt())
        .collect();
    let delta: Vec<f64> = modes
        .frequencies
        .iter()
        .map(|w| params.delta_l + (w - params.omega_x))
        .collect();
    let f = DMatrix::from_fn(n, n, |i, m| prefactor * (eta_n[m] * modes.amplitudes[(i, m)]));
    Ok(SidebandCouplings {
        f,
        delta,
        eta_n,
        mode_frequencies: modes.frequencies.clone(),
    })
}

fn check_layout(layout: &SpaceLayout, c: &SidebandCouplings) -> Result<()> {
    if layout.num_qubits() != c.num_ions() || layout.num_modes() != c.num_modes() {
        return Err(Error::InvalidParameter(format!(
            "layout has {} qubits / {} modes but couplings describe {} ions / {} modes",
            layout.num_qubits(),
            layout.num_modes(),
            c.num_ions(),
            c.num_modes()
        )));
    }
    Ok(())
}

/// `K_n = Σ_i F_in σ_i⁺ a_n`, the mode-`n` piece of the sideband before the
/// time-dependent phase.
pub fn sideband_mode_term(layout: &SpaceLayout, c: &SidebandCouplings, n: usize) -> Result<OperatorMatrix> {
    check_layout(layout, c)?;
    let a = boson(layout, n, BosonKind::Annihilate)?;
    let mut k = OperatorMatrix::zero(*layout);
    for i in 0..c.num_ions() {
        let sp = pauli(layout, i, PauliAxis::Plus)?;
        k = k.add(&sp.mul(&a).scale(c.f[(i, n)]));
    }
    Ok(k)
}

/// `H_r(t) = Σ_in F_in σ_i⁺ a_n e^{−iδ_n t} + h.c.`
pub fn build_red_sideband(layout: &SpaceLayout, c: &SidebandCouplings, t: f64) -> Result<OperatorMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    check_layout(layout, c)?;
    let mut h = OperatorMatrix::zero(*layout);
    for n in 0..c.num_modes() {
        let k = sideband_mode_term(layout, c, n)?.scale(Complex64::from_polar(1.0, -c.delta[n] * t));
        h = h.add(&k).add(&k.adjoint());
    }
    h.mark_hermitian()
}

/// Carrier drive `(Ω_d/2) Σ_i (e^{iφ_d} σ_i⁺ + h.c.)`. With the
/// counter-rotating flag the `σ⁺` amplitude picks up a factor `(1 + e^{2iω₀t})`.
pub fn build_carrier(
    layout: &SpaceLayout,
    params: &LabParams,
    t: f64,
    include_counter_rotating: bool,
) -> Result<OperatorMatrix> {
    let mut amp = Complex64::from_polar(0.5 * params.omega_d, params.phi_d);
    if include_counter_rotating {
        amp *= Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * params.omega0 * t);
    }
    let mut h = OperatorMatrix::zero(*layout);
    for i in 0..layout.num_qubits() {
        let sp = pauli(layout, i, PauliAxis::Plus)?.scale(amp);
        h = h.add(&sp).add(&sp.adjoint());
    }
    h.mark_hermitian()
}

/// Global dephasing `(F/2) Σ_i σ_i^z`.
pub fn build_noise_term(layout: &SpaceLayout, f_value: f64) -> OperatorMatrix {
    let diag: Vec<f64> = crate::operators::total_sz_diagonal(layout)
        .into_iter()
        .map(|s| 0.5 * f_value * s)
        .collect();
    OperatorMatrix::from_diagonal(*layout, &diag)
}

/// Diagonal of `Σ_n δ_n a_n†a_n`.
pub fn phonon_frame_diagonal(layout: &SpaceLayout, c: &SidebandCouplings) -> Result<Vec<f64>> {
    check_layout(layout, c)?;
    let pd = layout.phonon_dim();
    Ok((0..layout.dim())
        .map(|idx| {
            layout
                .phonon_occupations(idx % pd)
                .iter()
                .zip(&c.delta)
                .map(|(&k, d)| k as f64 * d)
                .sum()
        })
        .collect())
}

/// Time-independent generator `Σ δ_n a_n†a_n + carrier + Σ(F_in σ_i⁺ a_n + h.c.)`
/// of the co-rotating frame (noise excluded).
pub fn static_generator(layout: &SpaceLayout, params: &LabParams, c: &SidebandCouplings) -> Result<OperatorMatrix> {
    let diag = phonon_frame_diagonal(layout, c)?;
    let frame = OperatorMatrix::from_diagonal(*layout, &diag);
    let carrier = build_carrier(layout, params, 0.0, false)?;
    let sideband = build_red_sideband(layout, c, 0.0)?;
    frame.add(&carrier).add(&sideband).mark_hermitian()
}

/// Sum of the interaction-picture terms at time `t` (noise excluded).
pub fn interaction_hamiltonian(
    layout: &SpaceLayout,
    params: &LabParams,
    c: &SidebandCouplings,
    t: f64,
    include_counter_rotating: bool,
) -> Result<CsrMatrix> {
    let h = build_carrier(layout, params, t, include_counter_rotating)?.add(&build_red_sideband(layout, c, t)?);
    Ok(h.into_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{compute_modes, solve_equilibrium};

    fn two_ion_couplings(params: &LabParams) -> SidebandCouplings {
        let trap = params.trap(2).unwrap();
        let modes = compute_modes(&trap, &solve_equilibrium(&trap).unwrap()).unwrap();
        sideband_couplings(params, &modes).unwrap()
    }

    fn single_mode(f: Complex64, delta: f64) -> SidebandCouplings {
        SidebandCouplings {
            f: DMatrix::from_element(1, 1, f),
            delta: vec![delta],
            eta_n: vec![0.2],
            mode_frequencies: vec![1.0],
        }
    }

    #[test]
    fn coupling_magnitudes_for_two_ions() {
        let p = LabParams::reference();
        let c = two_ion_couplings(&p);
        let base = TWO_PI * 50e3;
        let s = 0.5f64.sqrt();
        let ratio_zz = 1.0 / (15.0f64 / 16.0).sqrt().sqrt();
        for i in 0..2 {
            assert!((c.f[(i, 0)].norm() - base * s).abs() < 1e-9 * base);
            assert!((c.f[(i, 1)].norm() - base * s * ratio_zz).abs() < 1e-9 * base);
        }
        // F is purely imaginary at φ_L = 0.
        assert!(c.f[(0, 0)].re.abs() < 1e-12 && c.f[(0, 0)].im > 0.0);
    }

    #[test]
    fn negative_detuning_mode_table() {
        let p = LabParams {
            delta_l: -TWO_PI * 800e3,
            ..LabParams::reference()
        };
        let c = two_ion_couplings(&p);
        assert!((c.delta[0] / TWO_PI + 800e3).abs() < 1e-6);
        let zz = c.delta[1] / TWO_PI;
        assert!((zz + 927.017e3).abs() < 1.0, "{zz}");
        assert!((zz + 928e3).abs() < 2e3);
    }

    #[test]
    fn vanishing_rabi_frequency() {
        let p = LabParams {
            omega_l: 0.0,
            ..LabParams::reference()
        };
        assert!(two_ion_couplings(&p).f.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sideband_half_period_cancels() {
        let delta = TWO_PI * 0.9e6;
        let c = single_mode(Complex64::new(0.0, 3.0e5), delta);
        let l = SpaceLayout::new(1, 1, 4).unwrap();
        let h0 = build_red_sideband(&l, &c, 0.0).unwrap();
        let h1 = build_red_sideband(&l, &c, PI / delta).unwrap();
        assert!(h0.add(&h1).max_abs() < 1e-9);
        let h2 = build_red_sideband(&l, &c, 0.37e-6).unwrap();
        assert!((h2.max_abs() - h0.max_abs()).abs() < 1e-9);
    }

    #[test]
    fn sideband_matrix_elements() {
        let f = Complex64::new(1.5e4, -2.0e4);
        let delta = -TWO_PI * 0.8e6;
        let t = 1.3e-6;
        let c = single_mode(f, delta);
        let l = SpaceLayout::new(1, 1, 3).unwrap();
        let h = build_red_sideband(&l, &c, t).unwrap();
        for n in 1..=3usize {
            let row = l.index(&[1], &[n - 1]).unwrap();
            let col = l.index(&[0], &[n]).unwrap();
            let want = f * (n as f64).sqrt() * Complex64::from_polar(1.0, -delta * t);
            assert!((h.matrix().get(row, col) - want).norm() < 1e-9);
        }
    }

    #[test]
    fn carrier_forms() {
        let l = SpaceLayout::new(2, 0, 0).unwrap();
        let p = LabParams::reference();
        let h = build_carrier(&l, &p, 0.0, false).unwrap();
        let sx = pauli(&l, 0, PauliAxis::X)
            .unwrap()
            .add(&pauli(&l, 1, PauliAxis::X).unwrap())
            .scale(Complex64::new(0.5 * p.omega_d, 0.0));
        assert!(h.sub(&sx).max_abs() < 1e-6);
        let off = LabParams { omega_d: 0.0, ..p };
        assert_eq!(build_carrier(&l, &off, 0.0, false).unwrap().max_abs(), 0.0);

        let single = SpaceLayout::spins(1).unwrap();
        let p1 = LabParams { phi_d: 0.7, ..p };
        let h1 = build_carrier(&single, &p1, 0.0, false).unwrap().to_dense();
        let ev = h1.symmetric_eigenvalues();
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 0.5 * p.omega_d).abs() < 1e-6 && (ev[1] - 0.5 * p.omega_d).abs() < 1e-6);
    }

    #[test]
    fn noise_term_spectrum() {
        let l = SpaceLayout::new(2, 1, 2).unwrap();
        assert_eq!(build_noise_term(&l, 0.0).max_abs(), 0.0);
        let h = build_noise_term(&l, 123.0);
        for occ in 0..3 {
            for (spins, want) in [([0u8, 0u8], -123.0), ([1, 1], 123.0), ([0, 1], 0.0), ([1, 0], 0.0)] {
                let idx = l.index(&spins, &[occ]).unwrap();
                assert_eq!(h.matrix().get(idx, idx).re, want);
            }
        }
    }

    #[test]
    fn static_generator_is_hermitian_and_conserves_excitations_without_drive() {
        let p = LabParams {
            omega_d: 0.0,
            ..LabParams::reference()
        };
        let c = two_ion_couplings(&p);
        let l = SpaceLayout::new(2, 2, 3).unwrap();
        let h = static_generator(&l, &p, &c).unwrap();
        assert!(h.hermiticity_defect() < 1e-12 * h.max_abs());
        for (r, col, _) in h.matrix().iter() {
            let exc = |idx: usize| {
                let (s, occ) = l.decompose(idx);
                s.count_ones() as usize + occ.iter().sum::<usize>()
            };
            assert_eq!(exc(r), exc(col));
        }
    }
}
