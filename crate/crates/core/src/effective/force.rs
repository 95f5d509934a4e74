//! Spin-dependent forces as Trotterized products of displacements.
//!
//! For one ion and one mode the red sideband splits into two forces,
//! `H = σ^x X(t) + σ^y Y(t)` with `X = (F a e^{−iδt} + h.c.)/2` and
//! `Y = i(F a e^{−iδt} − h.c.)/2`. Each force alone displaces the phonons
//! conditionally on its own spin eigenbasis and traces a circle that closes
//! after `2π/δ`. Alternating both forces leaves a spin-phonon entangled state
//! whose mean displacement does not return to the origin.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expm::expm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceKind {
    X,
    Y,
    Both,
}

impl std::str::FromStr for ForceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(ForceKind::X),
            "y" => Ok(ForceKind::Y),
            "both" => Ok(ForceKind::Both),
            other => Err(Error::InvalidParameter(format!("unknown force '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceDemoParams {
    /// Sideband coupling `F` (rad/s).
    pub f: Complex64,
    /// Detuning `δ` (rad/s).
    pub delta: f64,
    /// Fock cutoff of the phonon mode.
    pub n_cut: usize,
    /// Number of periods `2π/δ` to follow.
    pub periods: usize,
}

impl ForceDemoParams {
    /// Single ion with the reference drive: `F = iΩ_Lη/2`, `δ = δ_L`.
    pub fn reference() -> Self {
        let two_pi = 2.0 * PI;
        Self {
            f: Complex64::new(0.0, 0.5 * two_pi * 500e3 * 0.2),
            delta: two_pi * 800e3,
            n_cut: 24,
            periods: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceBranch {
    pub label: &'static str,
    /// `⟨a⟩` after each Trotter step, starting with the initial point.
    pub points: Vec<Complex64>,
    /// Phase of the overlap with the initial state at the end.
    pub final_phase: f64,
    /// `|⟨ψ(0)|ψ(T)⟩|`.
    pub return_overlap: f64,
}

impl ForceBranch {
    /// Distance of the final mean displacement from the start.
    pub fn closure(&self) -> f64 {
        (self.points[self.points.len() - 1] - self.points[0]).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceDemo {
    pub kind: ForceKind,
    pub steps: usize,
    pub branches: Vec<ForceBranch>,
    /// `Σ_k Im(Δα_k A*_{k−1})` from the discrete displacement increments of a
    /// single force (equal for both branches).
    pub discrete_area_phase: f64,
    /// Continuum value `sgn(δ) π |F|² / (2δ²)` per period.
    pub analytic_area_phase: f64,
}

/// Truncated displacement `exp(β a† − β* a)` for real `β`.
fn displacement_real(beta: f64, n_cut: usize) -> Result<DMatrix<Complex64>> {
    let d = n_cut + 1;
    let mut g = DMatrix::<Complex64>::zeros(d, d);
    for k in 1..d {
        let s = beta * (k as f64).sqrt();
        g[(k, k - 1)] = Complex64::new(s, 0.0);
        g[(k - 1, k)] = Complex64::new(-s, 0.0);
    }
    expm(&g)
}

pub fn trotter_force_demo(kind: ForceKind, steps: usize, p: &ForceDemoParams) -> Result<ForceDemo> {
    if steps == 0 || p.periods == 0 {
        return Err(Error::InvalidParameter("force demo needs at least one step and one period".into()));
    }
    if p.delta == 0.0 {
        return Err(Error::Resonance { mode: 0, detuning: 0.0 });
    }
    let total = 2.0 * PI * p.periods as f64 / p.delta.abs();
    let dt = total / steps as f64;
    let d = p.n_cut + 1;
    // Each sub-step displaces by β = −i c F* e^{iδt} dt/2 with c = 1 (x force,
    // σx = +1) or c = −i (y force, σy = +1); the opposite eigenvalue flips β.
    let mag = 0.5 * p.f.norm() * dt;
    let base = displacement_real(mag, p.n_cut)?;
    let base_inv = base.adjoint();

    // Conjugating a real displacement by e^{iθ a†a} rotates its argument by θ.
    let rotated = |theta: f64, sign: f64| -> DMatrix<Complex64> {
        let m = if sign > 0.0 { &base } else { &base_inv };
        DMatrix::from_fn(d, d, |r, c| m[(r, c)] * Complex64::from_polar(1.0, theta * (r as f64 - c as f64)))
    };
    let beta_angle = |t: f64, c: Complex64| -> f64 {
        (Complex64::new(0.0, -1.0) * c * p.f.conj() * Complex64::from_polar(1.0, p.delta * t)).arg()
    };

    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    // Spin eigenvectors in the {|0⟩, |1⟩} basis.
    let plus_x = [one * inv, one * inv];
    let minus_x = [one * inv, -one * inv];
    let plus_y = [one * inv, -i * inv];
    let minus_y = [one * inv, i * inv];

    let starts: Vec<(&'static str, [Complex64; 2])> = match kind {
        ForceKind::X | ForceKind::Both => vec![("+x", plus_x), ("-x", minus_x)],
        ForceKind::Y => vec![("+y", plus_y), ("-y", minus_y)],
    };

    // Apply a conditional displacement: project on the ± eigenvectors `e`,
    // displace by ±β, recombine. `psi[s]` is the phonon vector of spin s.
    let conditional = |psi: &mut [nalgebra::DVector<Complex64>; 2], e_plus: [Complex64; 2], e_minus: [Complex64; 2], dp: &DMatrix<Complex64>, dm: &DMatrix<Complex64>| {
        let proj = |e: [Complex64; 2], psi: &[nalgebra::DVector<Complex64>; 2]| {
            &psi[0] * e[0].conj() + &psi[1] * e[1].conj()
        };
        let cp = dp * proj(e_plus, psi);
        let cm = dm * proj(e_minus, psi);
        for s in 0..2 {
            psi[s] = &cp * e_plus[s] + &cm * e_minus[s];
        }
    };

    let mut branches = Vec::new();
    for (label, spin) in starts {
        let mut vac = nalgebra::DVector::<Complex64>::zeros(d);
        vac[0] = one;
        let mut psi = [&vac * spin[0], &vac * spin[1]];
        let init = psi.clone();
        let mean_a = |psi: &[nalgebra::DVector<Complex64>; 2]| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for v in psi.iter() {
                for k in 1..d {
                    acc += v[k - 1].conj() * v[k] * (k as f64).sqrt();
                }
            }
            acc
        };
        let mut points = vec![mean_a(&psi)];
        for step in 0..steps {
            let t = step as f64 * dt;
            if matches!(kind, ForceKind::X | ForceKind::Both) {
                let th = beta_angle(t, one);
                conditional(&mut psi, plus_x, minus_x, &rotated(th, 1.0), &rotated(th, -1.0));
            }
            if matches!(kind, ForceKind::Y | ForceKind::Both) {
                let th = beta_angle(t, -i);
                conditional(&mut psi, plus_y, minus_y, &rotated(th, 1.0), &rotated(th, -1.0));
            }
            points.push(mean_a(&psi));
        }
        let overlap = init[0].dotc(&psi[0]) + init[1].dotc(&psi[1]);
        branches.push(ForceBranch {
            label,
            points,
            final_phase: overlap.arg(),
            return_overlap: overlap.norm(),
        });
    }

    // Discrete area phase of the single-force loop from its increments.
    let mut acc = Complex64::new(0.0, 0.0);
    let mut discrete = 0.0;
    for step in 0..steps {
        let t = step as f64 * dt;
        let inc = Complex64::new(0.0, -0.5 * dt) * p.f.conj() * Complex64::from_polar(1.0, p.delta * t);
        discrete += (inc * acc.conj()).im;
        acc += inc;
    }
    let analytic = p.delta.signum() * PI * p.f.norm_sqr() / (2.0 * p.delta * p.delta) * p.periods as f64;

    Ok(ForceDemo {
        kind,
        steps,
        branches,
        discrete_area_phase: discrete,
        analytic_area_phase: analytic,
    })
}
