//! Equilibrium geometry and transverse normal modes of a linear ion chain.
//!
//! Positions are dimensionless, in units of `l_z = (e²/mω_z²)^{1/3}`, and
//! solve `z_i - Σ_{j≠i} (z_i - z_j)/|z_i - z_j|³ = 0`. The transverse
//! Coulomb coupling `V_ij` is stored in units of `mω_z²`, so that the mode
//! frequencies follow `ω_n = ω_x (1 + ξ V_n)^{1/2}` with `ξ = (ω_z/ω_x)²`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 200;
const MAX_DESCENT_ITERS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapParams {
    pub num_ions: usize,
    /// Radial (transverse) trap frequency, rad/s.
    pub omega_x: f64,
    /// Axial trap frequency, rad/s.
    pub omega_z: f64,
}

impl TrapParams {
    pub fn new(num_ions: usize, omega_x: f64, omega_z: f64) -> Result<Self> {
        if num_ions == 0 {
            return Err(Error::InvalidParameter("num_ions must be at least 1".into()));
        }
        if !(omega_z > 0.0 && omega_x > omega_z) {
            return Err(Error::InvalidParameter(format!(
                "expected omega_x > omega_z > 0, got omega_x = {omega_x:e}, omega_z = {omega_z:e}"
            )));
        }
        Ok(Self { num_ions, omega_x, omega_z })
    }

    /// Trap anisotropy `ξ = (ω_z/ω_x)²`.
    pub fn anisotropy(&self) -> f64 {
        (self.omega_z / self.omega_x).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonCrystal {
    /// Dimensionless equilibrium coordinates, ascending.
    pub positions: Vec<f64>,
}

impl IonCrystal {
    pub fn num_ions(&self) -> usize {
        self.positions.len()
    }

    /// Largest absolute force imbalance over the chain.
    pub fn residual(&self) -> f64 {
        force_balance(&self.positions)
            .iter()
            .fold(0.0_f64, |acc, g| acc.max(g.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Mode frequencies in rad/s, descending (centre of mass first).
    pub frequencies: Vec<f64>,
    /// `amplitudes[(i, n)] = M_in`; columns are orthonormal mode vectors.
    pub amplitudes: DMatrix<f64>,
    /// Dimensionless Coulomb coupling `V_ij / (mω_z²)`.
    pub coupling_matrix: DMatrix<f64>,
    /// Eigenvalues `V_n` matching the column order of `amplitudes`.
    pub coupling_eigenvalues: Vec<f64>,
    pub omega_x: f64,
}

impl NormalModes {
    pub fn num_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Largest deviation of `M Mᵀ` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.num_modes();
        let prod = &self.amplitudes * self.amplitudes.transpose();
        (prod - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Largest off-diagonal entry of `Mᵀ V M`.
    pub fn diagonalization_defect(&self) -> f64 {
        let d = self.amplitudes.transpose() * &self.coupling_matrix * &self.amplitudes;
        let mut worst = 0.0_f64;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if i != j {
                    worst = worst.max(d[(i, j)].abs());
                }
            }
        }
        worst
    }
}

/// `g_i(z) = z_i - Σ_{j≠i} sgn(z_i - z_j)/(z_i - z_j)²`, the gradient of the
/// dimensionless potential `Σ z_i²/2 + Σ_{i<j} 1/|z_i - z_j|`.
fn force_balance(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    (0..n)
        .map(|i| {
            let coulomb: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    d.signum() / (d * d)
                })
                .sum();
            z[i] - coulomb
        })
        .collect()
}

fn potential(z: &[f64]) -> f64 {
    let mut u: f64 = z.iter().map(|x| 0.5 * x * x).sum();
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            u += 1.0 / (z[i] - z[j]).abs();
        }
    }
    u
}

fn jacobian(z: &[f64]) -> DMatrix<f64> {
    let n = z.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let k = 2.0 / (z[i] - z[j]).abs().powi(3);
            diag += k;
            jac[(i, j)] = -k;
        }
        jac[(i, i)] = diag;
    }
    jac
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn strictly_ascending(z: &[f64]) -> bool {
    z.windows(2).all(|w| w[1] > w[0])
}

fn uniform_ansatz(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    // Minimum spacing of a long chain scales roughly as 2.018 N^-0.559.
    let spacing = 2.018 / (n as f64).powf(0.559);
    let centre = 0.5 * (n as f64 - 1.0);
    (0..n).map(|i| (i as f64 - centre) * spacing).collect()
}

fn newton(z: &mut Vec<f64>) -> Option<f64> {
    let mut res = force_balance(z);
    let mut norm = max_abs(&res);
    for _ in 0..MAX_NEWTON_ITERS {
        if norm < RESIDUAL_TOL {
            return Some(norm);
        }
        let jac = jacobian(z);
        // The Jacobian is symmetric positive definite at a stable minimum.
        let chol = jac.clone().cholesky()?;
        let rhs = DVector::from_vec(res.iter().map(|g| -g).collect());
        let step = chol.solve(&rhs);
        let eig = jac.symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| {
            (lo.min(e), hi.max(e.abs()))
        });
        if lo <= 0.0 || hi / lo > 1e12 {
            return None;
        }
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            if strictly_ascending(&trial) {
                let trial_res = force_balance(&trial);
                let trial_norm = max_abs(&trial_res);
                if trial_norm < norm || trial_norm < RESIDUAL_TOL {
                    *z = trial;
                    res = trial_res;
                    norm = trial_norm;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return None;
            }
        }
    }
    (norm < RESIDUAL_TOL).then_some(norm)
}

fn gradient_descent(z: &mut Vec<f64>) -> f64 {
    let mut step = 1e-2;
    let mut u = potential(z);
    let mut g = force_balance(z);
    for _ in 0..MAX_DESCENT_ITERS {
        let norm = max_abs(&g);
        if norm < RESIDUAL_TOL {
            return norm;
        }
        let trial: Vec<f64> = z.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
        if strictly_ascending(&trial) {
            let trial_u = potential(&trial);
            let trial_g = force_balance(&trial);
            // Near the minimum the energy change drops below rounding, so a
            // smaller gradient is accepted as progress too.
            let flat = (trial_u - u).abs() <= 8.0 * f64::EPSILON * u.abs();
            if trial_u < u || (flat && max_abs(&trial_g) < norm) {
                *z = trial;
                u = trial_u;
                g = trial_g;
                step *= 1.2;
                continue;
            }
        }
        step *= 0.5;
        if step < 1e-300 {
            break;
        }
    }
    max_abs(&g)
}

/// Equilibrium positions of `trap.num_ions` ions in a harmonic axial well.
pub fn solve_equilibrium(trap: &TrapParams) -> Result<IonCrystal> {
    let n = trap.num_ions;
    if n == 0 {
        return Err(Error::InvalidParameter("num_ions must be at least 1".into()));
    }
    let mut z = uniform_ansatz(n);
    if n > 1 && newton(&mut z).is_none() {
        z = uniform_ansatz(n);
        let residual = gradient_descent(&mut z);
        if residual >= RESIDUAL_TOL {
            return Err(Error::SolverFailure {
                residual,
                iterations: MAX_DESCENT_ITERS,
            });
        }
    }
    // Reflection symmetry of the trap.
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (z[i] - z[n - 1 - i])).collect();
    let crystal = IonCrystal { positions: sym };
    let residual = crystal.residual();
    if residual >= 1e-10 {
        return Err(Error::SolverFailure {
            residual,
            iterations: MAX_NEWTON_ITERS,
        });
    }
    Ok(crystal)
}

/// Transverse normal modes for a solved crystal.
pub fn compute_modes(trap: &TrapParams, crystal: &IonCrystal) -> Result<NormalModes> {
    let n = crystal.num_ions();
    if n != trap.num_ions {
        return Err(Error::InvalidParameter(format!(
            "crystal has {n} ions but trap expects {}",
            trap.num_ions
        )));
    }
    let z = &crystal.positions;
    let mut v = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let k = 1.0 / (z[i] - z[j]).abs().powi(3);
                v[(i, j)] = k;
                v[(i, i)] -= k;
            }
        }
    }
    let asym = (&v - v.transpose()).amax();
    if asym > 1e-12 * v.amax().max(1.0) {
        return Err(Error::InternalConsistency(format!(
            "Coulomb coupling matrix not symmetric (defect {asym:e})"
        )));
    }

    let eig = v.clone().symmetric_eigen();
    let xi = trap.anisotropy();
    // V_n <= 0, so ascending V_n is descending ω_n.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut amplitudes = DMatrix::<f64>::zeros(n, n);
    let mut frequencies = Vec::with_capacity(n);
    let mut coupling_eigenvalues = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        let mut vec = eig.eigenvectors.column(k).into_owned();
        let pivot = vec.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
        if pivot < 0.0 {
            vec.neg_mut();
        }
        amplitudes.set_column(col, &vec);
        let vn = eig.eigenvalues[k];
        let arg = 1.0 + xi * vn;
        if arg <= 0.0 {
            return Err(Error::InternalConsistency(format!(
                "transverse mode {col} unstable (1 + ξV_n = {arg:e})"
            )));
        }
        coupling_eigenvalues.push(vn);
        frequencies.push(trap.omega_x * arg.sqrt());
    }

    Ok(NormalModes {
        frequencies,
        amplitudes,
        coupling_matrix: v,
        coupling_eigenvalues,
        omega_x: trap.omega_x,
    })
}
