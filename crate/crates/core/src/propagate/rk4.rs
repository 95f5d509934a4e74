//! Classical fourth-order Runge-Kutta in the interaction picture, kept as an
//! independent reference for the exact integrators and for the optional
//! counter-rotating carrier term.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{sideband_mode_term, LabParams, SidebandCouplings};
use crate::operators::{pauli, total_sz_diagonal, OperatorMatrix, PauliAxis, SpaceLayout};
use crate::sparse::CsrMatrix;

/// Largest accepted `‖H‖·dt`.
pub const RK4_STEP_LIMIT: f64 = 0.5;

/// The pieces of `H(t) = carrier(t) + Σ_n (K_n e^{−iδ_n t} + h.c.) + (F/2)Σσ^z`.
#[derive(Debug, Clone)]
pub struct InteractionTerms {
    k: Vec<CsrMatrix>,
    kd: Vec<CsrMatrix>,
    delta: Vec<f64>,
    sp: CsrMatrix,
    sm: CsrMatrix,
    sz: Vec<f64>,
    carrier: Complex64,
    omega0: f64,
    counter_rotating: bool,
    static_norm: f64,
}

impl InteractionTerms {
    pub fn new(layout: &SpaceLayout, params: &LabParams, c: &SidebandCouplings, counter_rotating: bool) -> Result<Self> {
        let mut k = Vec::new();
        let mut kd = Vec::new();
        for n in 0..c.num_modes() {
            let term = sideband_mode_term(layout, c, n)?;
            kd.push(term.adjoint().into_matrix());
            k.push(term.into_matrix());
        }
        let mut sp = OperatorMatrix::zero(*layout);
        for i in 0..layout.num_qubits() {
            sp = sp.add(&pauli(layout, i, PauliAxis::Plus)?);
        }
        let sm = sp.adjoint().into_matrix();
        let sp = sp.into_matrix();
        let carrier = Complex64::from_polar(0.5 * params.omega_d, params.phi_d);
        let amp_max = carrier.norm() * if counter_rotating { 2.0 } else { 1.0 };
        let static_norm = k.iter().chain(&kd).map(|m| m.max_row_sum()).sum::<f64>()
            + amp_max * (sp.max_row_sum() + sm.max_row_sum());
        Ok(Self {
            k,
            kd,
            delta: c.delta.clone(),
            sp,
            sm,
            sz: total_sz_diagonal(layout),
            carrier,
            omega0: params.omega0,
            counter_rotating,
            static_norm,
        })
    }

    /// Upper bound on `‖H(t)‖` for noise values up to `f_max`.
    pub fn norm_bound(&self, f_max: f64) -> f64 {
        let q = self.sz.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        self.static_norm + 0.5 * f_max * q
    }

    pub fn check_step(&self, dt: f64, f_max: f64) -> Result<()> {
        let norm_dt = self.norm_bound(f_max) * dt;
        if norm_dt > RK4_STEP_LIMIT {
            return Err(Error::StepTooCoarse {
                norm_dt,
                limit: RK4_STEP_LIMIT,
            });
        }
        if self.counter_rotating && 2.0 * self.omega0 * dt > RK4_STEP_LIMIT {
            return Err(Error::StepTooCoarse {
                norm_dt: 2.0 * self.omega0 * dt,
                limit: RK4_STEP_LIMIT,
            });
        }
        Ok(())
    }

    /// `y = −i H(t) x`.
    fn rhs(&self, t: f64, f_noise: f64, x: &[Complex64], y: &mut [Complex64], tmp: &mut [Complex64]) {
        let mut amp = self.carrier;
        if self.counter_rotating {
            amp *= Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * self.omega0 * t);
        }
        for (yi, (xi, s)) in y.iter_mut().zip(x.iter().zip(&self.sz)) {
            *yi = *xi * (0.5 * f_noise * s);
        }
        let mut add = |m: &CsrMatrix, c: Complex64, y: &mut [Complex64]| {
            m.matvec(x, tmp);
            for (yi, ti) in y.iter_mut().zip(tmp.iter()) {
                *yi += c * ti;
            }
        };
        add(&self.sp, amp, y);
        add(&self.sm, amp.conj(), y);
        for n in 0..self.k.len() {
            let ph = Complex64::from_polar(1.0, -self.delta[n] * t);
            add(&self.k[n], ph, y);
            add(&self.kd[n], ph.conj(), y);
        }
        let mi = Complex64::new(0.0, -1.0);
        y.iter_mut().for_each(|z| *z *= mi);
    }

    /// Advances one column by `steps` RK4 steps of size `h` from time `t0`.
    pub fn evolve(&self, t0: f64, h: f64, steps: usize, f_noise: f64, psi: &mut [Complex64]) {
        let n = psi.len();
        let zero = Complex64::new(0.0, 0.0);
        let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        let mut tmp = vec![zero; n];
        let mut stage = vec![zero; n];
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            self.rhs(t, f_noise, psi, &mut k1, &mut tmp);
            for i in 0..n {
                stage[i] = psi[i] + k1[i] * (0.5 * h);
            }
            self.rhs(t + 0.5 * h, f_noise, &stage, &mut k2, &mut tmp);
            for i in 0..n {
                stage[i] = psi[i] + k2[i] * (0.5 * h);
            }
            self.rhs(t + 0.5 * h, f_noise, &stage, &mut k3, &mut tmp);
            for i in 0..n {
                stage[i] = psi[i] + k3[i] * h;
            }
            self.rhs(t + h, f_noise, &stage, &mut k4, &mut tmp);
            for i in 0..n {
                psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
    }
}
