//! Self-convergence checks against a halved step and a raised Fock cutoff.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{NoiseSpec, PulseSchedule, SimOptions, SimResult, Simulator, ThermalSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::LabParams;

/// Extra Fock levels used by the cutoff probe.
pub const NMAX_PROBE_STEP: usize = 4;

#[derive(Debug, Clone)]
pub struct ProbeCase {
    pub params: LabParams,
    pub num_ions: usize,
    pub n_max: usize,
    pub options: SimOptions,
    pub spin_state: DVector<Complex64>,
    pub nbar: f64,
    pub thermal_tolerance: f64,
    pub schedule: PulseSchedule,
    pub noise: Option<NoiseSpec>,
    pub t_final: f64,
    pub record_times: Vec<f64>,
    /// Optional pure target whose fidelity is tracked as well.
    pub target: Option<DVector<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub n_max: usize,
    /// Largest population change when the step is halved.
    pub dt_drift: f64,
    /// Largest population change when `n_max` grows by four.
    pub nmax_drift: f64,
    pub fidelity_dt_drift: Option<f64>,
    pub fidelity_nmax_drift: Option<f64>,
    /// Target fidelity of the reference run at each recorded time.
    pub base_fidelity: Option<Vec<f64>>,
}

impl ConvergenceReport {
    pub fn max_drift(&self) -> f64 {
        self.dt_drift.max(self.nmax_drift)
    }
}

fn run(case: &ProbeCase, dt: f64, n_max: usize, refinement: usize) -> Result<SimResult> {
    let options = SimOptions { dt, ..case.options };
    let sim = Simulator::from_params(case.params, case.num_ions, n_max, options)?;
    let thermal = ThermalSpec::new(case.nbar, n_max, case.thermal_tolerance)?;
    let noise = case.noise.map(|n| NoiseSpec { refinement, ..n });
    sim.evolve_thermal(&case.spin_state, &thermal, &case.schedule, noise.as_ref(), case.t_final, &case.record_times)
}

fn population_drift(a: &SimResult, b: &SimResult) -> f64 {
    a.populations
        .iter()
        .zip(&b.populations)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn fidelity_drift(a: &SimResult, b: &SimResult, target: &DVector<Complex64>) -> f64 {
    a.fidelity(target)
        .iter()
        .zip(b.fidelity(target))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Re-runs `case` at `dt/2` and at `n_max + 4` and reports the largest drift
/// of the recorded observables. The reference run samples its noise on the
/// half-step grid and coarsens it, so both step sizes see one realization.
pub fn convergence_probe(case: &ProbeCase) -> Result<ConvergenceReport> {
    if case.record_times.is_empty() {
        return Err(Error::InvalidParameter("convergence probe needs at least one record time".into()));
    }
    let dt = case.options.dt;
    let base = run(case, dt, case.n_max, 2)?;
    let fine = run(case, 0.5 * dt, case.n_max, 1)?;
    let wide = run(case, dt, case.n_max + NMAX_PROBE_STEP, 2)?;
    Ok(ConvergenceReport {
        dt,
        n_max: case.n_max,
        dt_drift: population_drift(&base, &fine),
        nmax_drift: population_drift(&base, &wide),
        fidelity_dt_drift: case.target.as_ref().map(|t| fidelity_drift(&base, &fine, t)),
        fidelity_nmax_drift: case.target.as_ref().map(|t| fidelity_drift(&base, &wide, t)),
        base_fidelity: case.target.as_ref().map(|t| base.fidelity(t)),
    })
}
