//! Analytic effective models used as oracles for the full dynamics: the
//! phonon-mediated couplings, the ideal gate and its Bell targets, the
//! polaron identities and the spin-dependent-force picture.

mod force;
mod polaron;

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::SidebandCouplings;
use crate::operators::{SpaceLayout, StateVector};

pub use force::{trotter_force_demo, ForceBranch, ForceDemo, ForceDemoParams, ForceKind};
pub use polaron::{polaron_transform_check, PolaronReport, DEFAULT_HEADROOM};

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCouplings {
    /// `J_ij = −Σ_n F_in F*_jn / δ_n` (real symmetric, rad/s).
    pub j_eff: DMatrix<f64>,
    /// `J̃ = J/4`, the coupling of the `σx σx` model.
    pub j_tilde: DMatrix<f64>,
    /// `b[i][(n, m)] = B_inm = −½ F_in F*_im (1/δ_n + 1/δ_m)`.
    pub b: Vec<DMatrix<Complex64>>,
    /// Pair used for the gate-time prediction.
    pub pair: Option<(usize, usize)>,
    /// `π / (8 |J̃_ij|)` for the chosen pair.
    pub t_gate: Option<f64>,
}

impl EffectiveCouplings {
    /// Flip-flop rate `J_12` of the first pair.
    pub fn flip_flop_rate(&self) -> Option<f64> {
        self.pair.map(|(i, j)| self.j_eff[(i, j)])
    }

    /// Time of a full SWAP under the XY model, `π / (2|J_12|)`.
    pub fn swap_time(&self) -> Option<f64> {
        self.flip_flop_rate().map(|j| PI / (2.0 * j.abs()))
    }

    /// `max |B_inm − B*_imn|`; zero when the residual term is Hermitian.
    pub fn residual_hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for bi in &self.b {
            worst = worst.max((bi - bi.adjoint()).camax());
        }
        worst
    }
}

pub fn compute_j_eff(c: &SidebandCouplings) -> Result<EffectiveCouplings> {
    for (mode, &d) in c.delta.iter().enumerate() {
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Resonance { mode, detuning: d });
        }
    }
    let ni = c.num_ions();
    let nm = c.num_modes();
    let j_eff = DMatrix::from_fn(ni, ni, |i, j| {
        -(0..nm)
            .map(|n| (c.f[(i, n)] * c.f[(j, n)].conj()).re / c.delta[n])
            .sum::<f64>()
    });
    let j_tilde = j_eff.scale(0.25);
    let b = (0..ni)
        .map(|i| {
            DMatrix::from_fn(nm, nm, |n, m| {
                c.f[(i, n)] * c.f[(i, m)].conj() * (-0.5 * (1.0 / c.delta[n] + 1.0 / c.delta[m]))
            })
        })
        .collect();
    let pair = (ni >= 2).then_some((0, 1));
    let t_gate = pair.map(|(i, j)| PI / (8.0 * j_tilde[(i, j)].abs()));
    Ok(EffectiveCouplings {
        j_eff,
        j_tilde,
        b,
        pair,
        t_gate,
    })
}

/// `(P10, P01)` for the XY model started in `|10⟩`.
pub fn xy_swap_probabilities(j: &EffectiveCouplings, t: f64) -> Result<(f64, f64)> {
    let rate = j
        .flip_flop_rate()
        .ok_or_else(|| Error::InvalidParameter("swap probabilities need two ions".into()))?;
    let s = (rate * t).sin();
    Ok((1.0 - s * s, s * s))
}

/// Parses a two-qubit label `"s1s2"` into a spin index `s1 + 2 s2`.
pub fn two_qubit_index(label: &str) -> Result<usize> {
    let b = label.as_bytes();
    if b.len() != 2 || !b.iter().all(|c| *c == b'0' || *c == b'1') {
        return Err(Error::InvalidParameter(format!("'{label}' is not a two-qubit basis label")));
    }
    Ok((b[0] - b'0') as usize + 2 * (b[1] - b'0') as usize)
}

/// `σ^d = e^{iφ}σ⁺ + e^{−iφ}σ⁻` in the `{|0⟩, |1⟩}` basis.
fn sigma_d(phi_d: f64) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(2, 2);
    m[(1, 0)] = Complex64::from_polar(1.0, phi_d);
    m[(0, 1)] = Complex64::from_polar(1.0, -phi_d);
    m
}

/// Two-qubit product `A ⊗ B` with qubit 1 on the low bit.
fn kron2(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(4, 4, |r, c| a[(r & 1, c & 1)] * b[(r >> 1, c >> 1)])
}

/// Ideal gate `U = exp(−i(π/4) σ_1^d σ_2^d)`.
pub fn ideal_gate(phi_d: f64) -> DMatrix<Complex64> {
    let sd = sigma_d(phi_d);
    let xx = kron2(&sd, &sd);
    DMatrix::<Complex64>::identity(4, 4).scale(FRAC_PI_4.cos()) - xx * Complex64::new(0.0, FRAC_PI_4.sin())
}

/// `Z_1 Z_2` on two qubits.
pub fn zz_matrix() -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_fn(4, |s, _| {
        if s == 0 || s == 3 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        }
    }))
}

pub fn ideal_gate_action(input: &str, phi_d: f64) -> Result<StateVector> {
    let idx = two_qubit_index(input)?;
    let u = ideal_gate(phi_d);
    StateVector::new(SpaceLayout::spins(2)?, u.column(idx).into_owned())
}

/// The four Bell states produced by the ideal gate from computational inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellTarget {
    /// `(|10⟩ − i|01⟩)/√2`, from `|10⟩`.
    PsiMinus,
    /// `(|11⟩ − i|00⟩)/√2`, from `|11⟩`.
    PhiMinus,
    /// `(|01⟩ − i|10⟩)/√2`, from `|01⟩`.
    PsiPlus,
    /// `(|00⟩ − i|11⟩)/√2`, from `|00⟩`.
    PhiPlus,
}

impl BellTarget {
    pub const ALL: [BellTarget; 4] = [
        BellTarget::PsiMinus,
        BellTarget::PhiMinus,
        BellTarget::PsiPlus,
        BellTarget::PhiPlus,
    ];

    pub fn input_label(self) -> &'static str {
        match self {
            BellTarget::PsiMinus => "10",
            BellTarget::PhiMinus => "11",
            BellTarget::PsiPlus => "01",
            BellTarget::PhiPlus => "00",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellTarget::PsiMinus => "psi_minus",
            BellTarget::PhiMinus => "phi_minus",
            BellTarget::PsiPlus => "psi_plus",
            BellTarget::PhiPlus => "phi_plus",
        }
    }

    /// Computational input state as a 4-vector.
    pub fn input(self) -> DVector<Complex64> {
        let mut v = DVector::zeros(4);
        v[two_qubit_index(self.input_label()).unwrap()] = Complex64::new(1.0, 0.0);
        v
    }

    /// Target for drive phase `φ_d`.
    pub fn state(self, phi_d: f64) -> DVector<Complex64> {
        ideal_gate(phi_d) * self.input()
    }
}

impl std::str::FromStr for BellTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BellTarget::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Bell target '{s}'")))
    }
}

/// Concurrence `2|ψ00 ψ11 − ψ01 ψ10|` of a pure two-qubit state.
pub fn concurrence(psi: &DVector<Complex64>) -> f64 {
    2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm()
}
