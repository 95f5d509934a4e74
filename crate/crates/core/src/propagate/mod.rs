//! Time evolution of the full spin-phonon system.
//!
//! States handed to and returned from the [`Simulator`] live in the
//! interaction picture of the time-dependent Hamiltonian
//! `H(t) = carrier + Σ_in (F_in σ_i⁺ a_n e^{−iδ_n t} + h.c.) + (F(t)/2)Σσ^z`.
//! Internally the exact integrators move to the frame co-rotating with
//! `Σ δ_n a_n†a_n`, where the generator is piecewise constant. Pulses and the
//! noise term are diagonal in the phonon occupations, so they commute with
//! that frame change and reduced spin observables are frame independent.

mod convergence;
pub mod pulses;
mod rk4;
pub mod spectral;
pub mod thermal;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{self, SpectralBounds};
use crate::crystal::{compute_modes, solve_equilibrium};
use crate::error::{Error, Result};
use crate::hamiltonian::{phonon_frame_diagonal, sideband_couplings, static_generator, LabParams, SidebandCouplings};
use crate::noise::{coarsen, sample_path, OUParams};
use crate::operators::{reduced_spin_density, total_sz_diagonal, SpaceLayout, StateVector};
use crate::sparse::CsrMatrix;

pub use convergence::{convergence_probe, ConvergenceReport, ProbeCase};
pub use pulses::{Pulse, PulseKind, PulseSchedule, SpinPermutation};
pub use rk4::{InteractionTerms, RK4_STEP_LIMIT};
pub use spectral::SpectralPropagator;
pub use thermal::{FockBranch, ThermalBranches, ThermalSampling, ThermalSpec};

/// Automatic integrator choice uses dense diagonalization up to this block size.
pub const AUTO_SPECTRAL_LIMIT: usize = 1024;
/// Largest Chebyshev argument `r·Δ` per step; longer steps are split.
pub const MAX_CHEBYSHEV_ARG: f64 = 1000.0;
/// End-to-end norm tolerance per trajectory.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Tolerance on the trace of averaged spin densities.
pub const POPULATION_TOLERANCE: f64 = 1e-8;
/// Columns evolved together in thermal averages.
const BRANCH_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Auto,
    /// Dense eigendecomposition of the static generator (noiseless only).
    Spectral,
    /// Chebyshev expansion per piecewise-constant step.
    Chebyshev,
    /// Fixed-step RK4 in the interaction picture.
    Rk4,
}

impl IntegratorKind {
    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::Auto => "auto",
            IntegratorKind::Spectral => "spectral",
            IntegratorKind::Chebyshev => "chebyshev",
            IntegratorKind::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for IntegratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            IntegratorKind::Auto,
            IntegratorKind::Spectral,
            IntegratorKind::Chebyshev,
            IntegratorKind::Rk4,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown integrator '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub integrator: IntegratorKind,
    /// Noise cell length and RK4 step (s).
    pub dt: f64,
    /// Keep the `e^{2iω₀t}` carrier term (RK4 only).
    pub counter_rotating: bool,
    pub chebyshev_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorKind::Auto,
            dt: 1e-6,
            counter_rotating: false,
            chebyshev_tol: chebyshev::DEFAULT_TOL,
        }
    }
}

/// One realization of the noise field, constant on cells `[k·dt, (k+1)·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl NoisePath {
    /// Samples trajectory `stream` on a grid `refinement` times finer than
    /// `dt` and keeps every `refinement`-th value, so that runs at `dt` and
    /// `dt/refinement` can share one realization.
    pub fn sample(ou: &OUParams, stream: u64, dt: f64, t_final: f64, refinement: usize) -> Result<Self> {
        if !(dt > 0.0) || refinement == 0 {
            return Err(Error::InvalidParameter("noise grid needs dt > 0 and refinement >= 1".into()));
        }
        let cells = (t_final / dt).ceil() as usize + 1;
        let fine = sample_path(ou, stream, dt / refinement as f64, cells * refinement)?;
        Ok(Self {
            dt,
            values: coarsen(&fine, refinement),
        })
    }

    pub fn constant(value: f64, dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            values: vec![value; (t_final / dt).ceil() as usize + 1],
        }
    }

    /// Value on the cell containing `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = ((t / self.dt).floor().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub ou: OUParams,
    pub trajectories: usize,
    /// See [`NoisePath::sample`].
    pub refinement: usize,
    /// First stream index; trajectory `k` uses stream `offset + k`.
    pub stream_offset: u64,
}

impl NoiseSpec {
    pub fn new(ou: OUParams, trajectories: usize) -> Self {
        Self {
            ou,
            trajectories,
            refinement: 1,
            stream_offset: 0,
        }
    }
}

/// States along one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetadata {
    pub params: LabParams,
    pub num_ions: usize,
    pub n_max: usize,
    pub dt: f64,
    pub integrator: IntegratorKind,
    pub t_final: f64,
    pub nbar: f64,
    pub branches: usize,
    pub retained_mass: f64,
    pub physical_mass: f64,
    pub renormalization_defect: f64,
    pub noise: Option<OUParams>,
    pub trajectories: usize,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub times: Vec<f64>,
    /// Phonon-traced spin density at each time, averaged over the mixture.
    pub spin_density: Vec<DMatrix<Complex64>>,
    /// Diagonal of `spin_density`, `P_s` with `s = s_1 + 2 s_2 + …`.
    pub populations: Vec<Vec<f64>>,
    /// Branch-averaged spin densities of each noise trajectory (empty when
    /// noiseless).
    pub per_trajectory: Vec<Vec<DMatrix<Complex64>>>,
    pub metadata: SimMetadata,
    pub warnings: Vec<String>,
}

fn overlap(rho: &DMatrix<Complex64>, target: &DVector<Complex64>) -> f64 {
    (target.adjoint() * rho * target)[(0, 0)].re
}

impl SimResult {
    /// `⟨target|ρ(t)|target⟩` at each recorded time.
    pub fn fidelity(&self, target: &DVector<Complex64>) -> Vec<f64> {
        self.spin_density.iter().map(|r| overlap(r, target)).collect()
    }

    /// Fidelity with the standard error over noise trajectories (zero when noiseless).
    pub fn fidelity_with_stderr(&self, target: &DVector<Complex64>) -> Vec<(f64, f64)> {
        let mean = self.fidelity(target);
        let k = self.per_trajectory.len();
        if k < 2 {
            return mean.into_iter().map(|m| (m, 0.0)).collect();
        }
        mean.iter()
            .enumerate()
            .map(|(j, &m)| {
                let ss: f64 = self.per_trajectory.iter().map(|tr| (overlap(&tr[j], target) - m).powi(2)).sum();
                (m, (ss / (k - 1) as f64 / k as f64).sqrt())
            })
            .collect()
    }

    /// `max_t |Σ_s P_s − 1|`.
    pub fn population_defect(&self) -> f64 {
        self.populations
            .iter()
            .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub struct Simulator {
    layout: SpaceLayout,
    params: LabParams,
    couplings: SidebandCouplings,
    options: SimOptions,
    generator: CsrMatrix,
    frame: Vec<f64>,
    sz: Vec<f64>,
    interval: (f64, f64),
    largest_block: usize,
    spectral: OnceLock<SpectralPropagator>,
    rk4: OnceLock<InteractionTerms>,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("layout", &self.layout)
            .field("options", &self.options)
            .field("largest_block", &self.largest_block)
            .finish()
    }
}

impl Simulator {
    pub fn new(layout: SpaceLayout, params: LabParams, couplings: SidebandCouplings, options: SimOptions) -> Result<Self> {
        params.validate()?;
        if !(options.dt > 0.0 && options.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", options.dt)));
        }
        let generator = static_generator(&layout, &params, &couplings)?.into_matrix();
        let frame = phonon_frame_diagonal(&layout, &couplings)?;
        let interval = generator.gershgorin_interval();
        let largest_block = generator.connected_components().iter().map(|c| c.len()).max().unwrap_or(0);
        Ok(Self {
            sz: total_sz_diagonal(&layout),
            layout,
            params,
            couplings,
            options,
            generator,
            frame,
            interval,
            largest_block,
            spectral: OnceLock::new(),
            rk4: OnceLock::new(),
        })
    }

    /// Builds the crystal, its modes and the couplings for `num_ions` ions.
    pub fn from_params(params: LabParams, num_ions: usize, n_max: usize, options: SimOptions) -> Result<Self> {
        let trap = params.trap(num_ions)?;
        let modes = compute_modes(&trap, &solve_equilibrium(&trap)?)?;
        let couplings = sideband_couplings(&params, &modes)?;
        let layout = SpaceLayout::new(num_ions, couplings.num_modes(), n_max)?;
        Self::new(layout, params, couplings, options)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn params(&self) -> &LabParams {
        &self.params
    }

    pub fn couplings(&self) -> &SidebandCouplings {
        &self.couplings
    }

    pub fn options(&self) -> &SimOptions {
        &self.options
    }

    /// The static-frame generator (noise excluded).
    pub fn generator(&self) -> &CsrMatrix {
        &self.generator
    }

    /// Size of the largest connected block of the generator.
    pub fn largest_block(&self) -> usize {
        self.largest_block
    }

    /// The integrator used for a run with or without noise.
    pub fn resolve_integrator(&self, noisy: bool) -> Result<IntegratorKind> {
        if self.options.counter_rotating {
            return match self.options.integrator {
                IntegratorKind::Auto | IntegratorKind::Rk4 => Ok(IntegratorKind::Rk4),
                other => Err(Error::InvalidParameter(format!(
                    "the counter-rotating carrier needs the rk4 integrator, not {}",
                    other.name()
                ))),
            };
        }
        match self.options.integrator {
            IntegratorKind::Auto if noisy => Ok(IntegratorKind::Chebyshev),
            IntegratorKind::Auto if self.largest_block <= AUTO_SPECTRAL_LIMIT => Ok(IntegratorKind::Spectral),
            IntegratorKind::Auto => Ok(IntegratorKind::Chebyshev),
            IntegratorKind::Spectral if noisy => Err(Error::InvalidParameter(
                "the spectral integrator cannot follow a time-dependent noise field".into(),
            )),
            other => Ok(other),
        }
    }

    fn spectral(&self) -> Result<&SpectralPropagator> {
        if let Some(s) = self.spectral.get() {
            return Ok(s);
        }
        let s = SpectralPropagator::new(&self.generator)?;
        Ok(self.spectral.get_or_init(|| s))
    }

    fn rk4_terms(&self) -> Result<&InteractionTerms> {
        if let Some(t) = self.rk4.get() {
            return Ok(t);
        }
        let t = InteractionTerms::new(&self.layout, &self.params, &self.couplings, self.options.counter_rotating)?;
        Ok(self.rk4.get_or_init(|| t))
    }

    /// Multiplies by `e^{±iDt}` with `D = Σ δ_n a_n†a_n`.
    fn frame_rotate(&self, psi: &mut [Complex64], t: f64, sign: f64) {
        let n = self.layout.dim();
        for col in psi.chunks_mut(n) {
            for (z, d) in col.iter_mut().zip(&self.frame) {
                *z *= Complex64::from_polar(1.0, sign * d * t);
            }
        }
    }

    /// Evolves `ncols` column-major interaction-picture states from `0` to
    /// `t_final`, applying the scheduled pulses and calling `observer(j, ψ)`
    /// with the interaction-picture states at each `record_times[j]`.
    #[allow(clippy::too_many_arguments)]
    pub fn evolve_columns(
        &self,
        psi: &mut [Complex64],
        ncols: usize,
        schedule: &PulseSchedule,
        t_final: f64,
        noise: Option<&NoisePath>,
        record_times: &[f64],
        observer: &mut dyn FnMut(usize, &[Complex64]),
    ) -> Result<()> {
        let dim = self.layout.dim();
        if psi.len() != dim * ncols {
            return Err(Error::InvalidParameter(format!(
                "state buffer has {} entries, expected {}",
                psi.len(),
                dim * ncols
            )));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid final time {t_final}")));
        }
        schedule.validate(t_final, self.layout.num_qubits())?;
        if record_times.iter().any(|t| !(*t >= 0.0 && *t <= t_final)) || record_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("record times must be sorted within [0, t_final]".into()));
        }
        if let Some(p) = noise {
            if (p.values.len() as f64) * p.dt < t_final {
                return Err(Error::InvalidParameter("noise path is shorter than the evolution".into()));
            }
        }
        let kind = self.resolve_integrator(noise.is_some())?;

        let mut breaks: Vec<f64> = vec![0.0, t_final];
        breaks.extend(schedule.pulses().iter().map(|p| p.time));
        breaks.extend_from_slice(record_times);
        if let Some(p) = noise {
            let cells = (t_final / p.dt).ceil() as usize;
            breaks.extend((1..cells).map(|k| k as f64 * p.dt).filter(|&t| t < t_final));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let perms: Vec<SpinPermutation> = schedule
            .pulses()
            .iter()
            .map(|p| SpinPermutation::from_factors(self.layout.num_qubits(), &p.kind.factors()))
            .collect::<Result<_>>()?;

        let mut stepper = Stepper::new(self, kind, noise)?;
        let pd = self.layout.phonon_dim();
        let mut next_pulse = 0;
        let mut next_record = 0;
        let mut t = 0.0;
        let mut scratch = Vec::new();
        for &tb in &breaks {
            if tb > t {
                stepper.advance(t, tb, psi, ncols)?;
                t = tb;
            }
            while next_pulse < perms.len() && schedule.pulses()[next_pulse].time <= tb {
                perms[next_pulse].apply(psi, pd, ncols);
                next_pulse += 1;
            }
            while next_record < record_times.len() && record_times[next_record] <= tb {
                scratch.clear();
                scratch.extend_from_slice(psi);
                if stepper.static_frame() {
                    self.frame_rotate(&mut scratch, tb, 1.0);
                }
                observer(next_record, &scratch);
                next_record += 1;
            }
        }
        if stepper.static_frame() {
            self.frame_rotate(psi, t_final, 1.0);
        }
        Ok(())
    }

    /// Evolves a single state and returns it at `record_times`. With noise,
    /// the field follows trajectory `stream` of `ou` on cells of `options.dt`.
    pub fn evolve_trajectory(
        &self,
        initial: &StateVector,
        schedule: &PulseSchedule,
        noise: Option<(&OUParams, u64)>,
        t_final: f64,
        record_times: &[f64],
    ) -> Result<Trajectory> {
        if initial.layout() != &self.layout {
            return Err(Error::InvalidParameter("initial state has a different layout".into()));
        }
        if (initial.norm() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("initial state norm {} is not 1", initial.norm())));
        }
        let path = noise
            .map(|(ou, stream)| NoisePath::sample(ou, stream, self.options.dt, t_final, 1))
            .transpose()?;
        let mut psi: Vec<Complex64> = initial.amplitudes().iter().copied().collect();
        let mut states = Vec::with_capacity(record_times.len());
        let layout = self.layout;
        self.evolve_columns(&mut psi, 1, schedule, t_final, path.as_ref(), record_times, &mut |_, v| {
            states.push(DVector::from_column_slice(v));
        })?;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InternalConsistency(format!("norm drifted to {norm}")));
        }
        Ok(Trajectory {
            times: record_times.to_vec(),
            states: states
                .into_iter()
                .map(|a| StateVector::new(layout, a))
                .collect::<Result<_>>()?,
        })
    }

    /// Mixture average over thermal Fock branches (and noise trajectories when
    /// `noise` is given) for a pure initial spin state.
    pub fn evolve_thermal(
        &self,
        spin_state: &DVector<Complex64>,
        thermal: &ThermalSpec,
        schedule: &PulseSchedule,
        noise: Option<&NoiseSpec>,
        t_final: f64,
        record_times: &[f64],
    ) -> Result<SimResult> {
        let sd = self.layout.spin_dim();
        if spin_state.len() != sd {
            return Err(Error::InvalidParameter(format!("spin state has length {}, expected {sd}", spin_state.len())));
        }
        if (spin_state.norm() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter("spin state is not normalized".into()));
        }
        if thermal.n_max > self.layout.n_max() {
            return Err(Error::InvalidParameter(format!(
                "thermal cutoff {} exceeds the Fock cutoff {}",
                thermal.n_max,
                self.layout.n_max()
            )));
        }
        let mix = thermal.branches(self.layout.num_modes())?;
        let trajectories = noise.map_or(1, |n| n.trajectories);
        if trajectories == 0 {
            return Err(Error::InvalidParameter("need at least one noise trajectory".into()));
        }
        let chunks: Vec<&[FockBranch]> = mix.branches.chunks(BRANCH_CHUNK).collect();
        let items: Vec<(usize, usize)> = (0..trajectories)
            .flat_map(|k| (0..chunks.len()).map(move |c| (k, c)))
            .collect();
        let dim = self.layout.dim();
        let nt = record_times.len();

        let partial: Vec<Vec<DMatrix<Complex64>>> = items
            .par_iter()
            .map(|&(k, c)| -> Result<Vec<DMatrix<Complex64>>> {
                let path = noise
                    .map(|n| NoisePath::sample(&n.ou, n.stream_offset + k as u64, self.options.dt, t_final, n.refinement))
                    .transpose()?;
                let branches = chunks[c];
                let ncols = branches.len();
                let mut psi = Vec::with_capacity(dim * ncols);
                for b in branches {
                    let v = StateVector::product(self.layout, spin_state, &b.occupations)?;
                    psi.extend(v.amplitudes().iter().copied());
                }
                let mut acc = vec![DMatrix::<Complex64>::zeros(sd, sd); nt];
                self.evolve_columns(&mut psi, ncols, schedule, t_final, path.as_ref(), record_times, &mut |j, v| {
                    for (col, b) in v.chunks(dim).zip(branches) {
                        acc[j] += reduced_spin_density(col, sd).scale(b.weight);
                    }
                })?;
                for col in psi.chunks(dim) {
                    let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > NORM_TOLERANCE {
                        return Err(Error::InternalConsistency(format!("norm drifted to {norm}")));
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;

        let mut per_trajectory: Vec<Vec<DMatrix<Complex64>>> = Vec::with_capacity(trajectories);
        let mut it = partial.into_iter();
        for _ in 0..trajectories {
            let mut acc = vec![DMatrix::<Complex64>::zeros(sd, sd); nt];
            for _ in 0..chunks.len() {
                for (a, p) in acc.iter_mut().zip(it.next().expect("one result per item")) {
                    *a += p;
                }
            }
            per_trajectory.push(acc);
        }
        let mut spin_density = vec![DMatrix::<Complex64>::zeros(sd, sd); nt];
        for tr in &per_trajectory {
            for (a, r) in spin_density.iter_mut().zip(tr) {
                *a += r;
            }
        }
        spin_density.iter_mut().for_each(|r| *r /= Complex64::new(trajectories as f64, 0.0));
        let populations: Vec<Vec<f64>> = spin_density.iter().map(|r| (0..sd).map(|s| r[(s, s)].re).collect()).collect();

        let mut warnings = Vec::new();
        warnings.extend(mix.warning.clone());
        let result = SimResult {
            times: record_times.to_vec(),
            spin_density,
            populations,
            per_trajectory: if noise.is_some() { per_trajectory } else { Vec::new() },
            metadata: SimMetadata {
                params: self.params,
                num_ions: self.layout.num_qubits(),
                n_max: self.layout.n_max(),
                dt: self.options.dt,
                integrator: self.resolve_integrator(noise.is_some())?,
                t_final,
                nbar: thermal.nbar,
                branches: mix.branches.len(),
                retained_mass: mix.retained_mass,
                physical_mass: mix.physical_mass,
                renormalization_defect: mix.renormalization_defect,
                noise: noise.map(|n| n.ou),
                trajectories: noise.map_or(0, |n| n.trajectories),
            },
            warnings,
        };
        let defect = result.population_defect();
        if defect > POPULATION_TOLERANCE {
            return Err(Error::InternalConsistency(format!("populations sum to 1 only within {defect:e}")));
        }
        Ok(result)
    }
}

/// Relative tolerance for reusing Chebyshev coefficients across segments.
const COEFF_MATCH: f64 = 1e-12;

/// Segment propagation for one evolution call.
struct Stepper<'a> {
    sim: &'a Simulator,
    kind: IntegratorKind,
    noise: Option<&'a NoisePath>,
    bounds: SpectralBounds,
    /// Expansion coefficients by segment length. Cell spans differ in the
    /// last bits, so lengths within `COEFF_MATCH` relative are shared.
    coeffs: Vec<(f64, Vec<Complex64>)>,
    ws: chebyshev::Workspace,
    diag: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(sim: &'a Simulator, kind: IntegratorKind, noise: Option<&'a NoisePath>) -> Result<Self> {
        let f_max = noise.map_or(0.0, |p| p.max_abs());
        let q = sim.layout.num_qubits() as f64;
        let (lo, hi) = sim.interval;
        let bounds = SpectralBounds::from_interval(lo - 0.5 * f_max * q, hi + 0.5 * f_max * q);
        match kind {
            IntegratorKind::Spectral => {
                sim.spectral()?;
            }
            IntegratorKind::Rk4 => sim.rk4_terms()?.check_step(sim.options.dt, f_max)?,
            _ => {}
        }
        Ok(Self {
            sim,
            kind,
            noise,
            bounds,
            coeffs: Vec::new(),
            ws: chebyshev::Workspace::default(),
            diag: Vec::new(),
        })
    }

    fn static_frame(&self) -> bool {
        self.kind != IntegratorKind::Rk4
    }

    fn advance(&mut self, t0: f64, t1: f64, psi: &mut [Complex64], ncols: usize) -> Result<()> {
        let span = t1 - t0;
        let f = self.noise.map_or(0.0, |p| p.value_at(0.5 * (t0 + t1)));
        match self.kind {
            IntegratorKind::Spectral => {
                self.sim.spectral()?.apply(span, psi, ncols);
            }
            IntegratorKind::Chebyshev => {
                let pieces = ((self.bounds.radius * span) / MAX_CHEBYSHEV_ARG).ceil().max(1.0) as usize;
                let h = span / pieces as f64;
                let tol = self.sim.options.chebyshev_tol;
                let radius = self.bounds.radius;
                let slot = match self.coeffs.iter().position(|(h0, _)| (h - h0).abs() <= COEFF_MATCH * h0) {
                    Some(k) => k,
                    None => {
                        self.coeffs.push((h, chebyshev::expansion_coefficients(radius * h, tol)));
                        self.coeffs.len() - 1
                    }
                };
                let coeffs = &self.coeffs[slot].1;
                if self.noise.is_some() {
                    self.diag.clear();
                    self.diag.extend(self.sim.sz.iter().map(|s| 0.5 * f * s));
                }
                for _ in 0..pieces {
                    chebyshev::propagate_cols(&self.sim.generator, &self.diag, self.bounds, h, coeffs, psi, ncols, &mut self.ws);
                }
            }
            IntegratorKind::Rk4 => {
                let terms = self.sim.rk4_terms()?;
                let steps = (span / self.sim.options.dt).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                let dim = self.sim.layout.dim();
                for col in psi.chunks_mut(dim) {
                    terms.evolve(t0, h, steps, f, col);
                }
            }
            IntegratorKind::Auto => unreachable!("integrator resolved before stepping"),
        }
        Ok(())
    }
}
