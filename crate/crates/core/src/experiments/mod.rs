//! Configured pipelines that regenerate the figure data as CSV tables.

mod config;
mod table;

use std::path::Path;

use num_complex::Complex64;

pub use config::{
    CoherenceConfig, DriveConfig, ExperimentConfig, ExperimentKind, HaarConfig, LabConfig, NoiseConfig,
    NumericsConfig, ThermalConfig,
};
pub use table::Table;

use crate::crystal::{compute_modes, solve_equilibrium};
use crate::effective::{
    compute_j_eff, polaron_transform_check, trotter_force_demo, two_qubit_index, xy_swap_probabilities, BellTarget,
    ForceDemoParams, ForceKind, PolaronReport,
};
use crate::error::{Error, Result};
use crate::fidelity::{
    bell_fidelity, channel_fidelity, entanglement_fidelity, haar_channel_fidelity,
    relation_deviation, scan_grid, BellScan, Estimate, SimulatedChannel,
};
use crate::hamiltonian::{sideband_couplings, LabParams};
use crate::noise::{coherence_fast_path, fit_t2, ou_from_t2, uniform_grid, CoherenceCurve, OUParams, T2Fit};
use crate::operators::SpaceLayout;
use crate::propagate::{
    convergence_probe, ConvergenceReport, NoiseSpec, ProbeCase, PulseSchedule, Simulator, ThermalSpec,
};

/// Tables and warnings produced by one experiment.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    /// Writes every table to `dir` with `config` echoed in the header.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<Vec<std::path::PathBuf>> {
        let text = config.to_toml()?;
        self.tables.iter().map(|t| t.write(dir, &text)).collect()
    }
}

fn two_ion_simulator(params: LabParams, n_max: usize, numerics: &NumericsConfig) -> Result<Simulator> {
    Simulator::from_params(params, 2, n_max, numerics.sim_options()?)
}

fn gate_time(sim: &Simulator) -> Result<f64> {
    compute_j_eff(sim.couplings())?
        .t_gate
        .ok_or_else(|| Error::InvalidParameter("gate time needs two ions".into()))
}

fn schedule_for(t_final: f64, echo: bool) -> Result<PulseSchedule> {
    if echo {
        PulseSchedule::echo(t_final)
    } else {
        Ok(PulseSchedule::empty())
    }
}

/// Maximizes the fidelity of `target` reached from its computational input
/// over the final times in `grid`.
pub fn bell_scan(
    sim: &Simulator,
    target: BellTarget,
    thermal: &ThermalSpec,
    noise: Option<&NoiseSpec>,
    grid: &[f64],
    echo: bool,
) -> Result<BellScan> {
    let psi = target.state(sim.params().phi_d);
    let input = target.input();
    bell_fidelity(grid, |tf| {
        let r = sim.evolve_thermal(&input, thermal, &schedule_for(tf, echo)?, noise, tf, &[tf])?;
        Ok(r.fidelity_with_stderr(&psi)[0])
    })
}

fn noise_spec(noise: &NoiseConfig, t2: f64) -> Result<Option<NoiseSpec>> {
    if t2.is_infinite() {
        return Ok(None);
    }
    Ok(Some(NoiseSpec::new(ou_from_t2(t2, noise.tau_ratio, noise.seed)?, noise.trajectories)))
}

pub fn run_modes(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let lab = config.lab()?;
    let params = lab.params()?;
    let trap = params.trap(lab.num_ions)?;
    let crystal = solve_equilibrium(&trap)?;
    let modes = compute_modes(&trap, &crystal)?;
    let c = sideband_couplings(&params, &modes)?;
    let n = modes.num_modes();
    let mut cols = vec!["mode".to_string(), "frequency_hz".into(), "omega_over_omega_x".into(), "eta_n".into()];
    cols.extend((1..=n).map(|i| format!("b_{i}")));
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("modes", &refs);
    for m in 0..n {
        let mut row = vec![
            m as f64,
            modes.frequencies[m] / (2.0 * std::f64::consts::PI),
            modes.frequencies[m] / params.omega_x,
            c.eta_n[m],
        ];
        row.extend((0..n).map(|i| modes.amplitudes[(i, m)]));
        t.push(row);
    }
    t.meta("orthogonality_defect", modes.orthogonality_defect());
    let mut eq = Table::new("equilibrium", &["ion", "position"]);
    for (i, x) in crystal.positions.iter().enumerate() {
        eq.push(vec![i as f64, *x]);
    }
    eq.meta("force_residual", crystal.residual());
    Ok(ExperimentOutput {
        tables: vec![t, eq],
        warnings: Vec::new(),
    })
}

pub fn run_jeff(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let lab = config.lab()?;
    let params = lab.params()?;
    let trap = params.trap(lab.num_ions)?;
    let modes = compute_modes(&trap, &solve_equilibrium(&trap)?)?;
    let c = sideband_couplings(&params, &modes)?;
    let j = compute_j_eff(&c)?;
    let hz = 1.0 / (2.0 * std::f64::consts::PI);
    let mut pairs = Table::new("jeff_pairs", &["i", "j", "j_hz", "j_tilde_hz"]);
    for a in 0..c.num_ions() {
        for b in a + 1..c.num_ions() {
            pairs.push(vec![a as f64, b as f64, j.j_eff[(a, b)] * hz, j.j_tilde[(a, b)] * hz]);
        }
    }
    if let Some(tg) = j.t_gate {
        pairs.meta("t_gate_s", tg);
    }
    if let Some(ts) = j.swap_time() {
        pairs.meta("swap_time_s", ts);
    }
    let mut per_mode = Table::new("jeff_modes", &["mode", "frequency_hz", "delta_hz", "eta_n", "max_f_over_delta"]);
    for n in 0..c.num_modes() {
        let fmax = (0..c.num_ions()).map(|i| c.f[(i, n)].norm()).fold(0.0, f64::max);
        per_mode.push(vec![
            n as f64,
            c.mode_frequencies[n] * hz,
            c.delta[n] * hz,
            c.eta_n[n],
            fmax / c.delta[n].abs(),
        ]);
    }
    let mut warnings = Vec::new();
    if !params.sideband_regime_ok() {
        warnings.push("Omega_L exceeds the laser-qubit detuning; the sideband picture is unreliable".into());
    }
    Ok(ExperimentOutput {
        tables: vec![pairs, per_mode],
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct SwapTrace {
    pub nbar: f64,
    pub times: Vec<f64>,
    pub p10_exact: Vec<f64>,
    pub p01_exact: Vec<f64>,
    pub p10_eff: Vec<f64>,
    pub p01_eff: Vec<f64>,
    /// Largest `P01` within the first SWAP cycle, refined parabolically.
    pub peak_time: Option<f64>,
    /// `P01` at the XY SWAP time.
    pub amplitude_at_swap: f64,
    pub physical_mass: f64,
}

#[derive(Debug, Clone)]
pub struct Fig2a {
    pub swap_time: f64,
    pub traces: Vec<SwapTrace>,
    pub warnings: Vec<String>,
}

/// Position of the largest `y` over `t ≤ t_window`, from a least-squares
/// parabola through every sample within `0.1` of that maximum. The sideband
/// adds small fast wiggles, so a three-point vertex would be biased.
fn peak_before(t: &[f64], y: &[f64], t_window: f64) -> Option<f64> {
    let i = (0..y.len())
        .filter(|&i| t[i] <= t_window)
        .max_by(|&a, &b| y[a].total_cmp(&y[b]))?;
    let (mut lo, mut hi) = (i, i);
    while lo > 0 && y[lo - 1] > y[i] - 0.1 {
        lo -= 1;
    }
    while hi + 1 < y.len() && y[hi + 1] > y[i] - 0.1 {
        hi += 1;
    }
    if hi - lo < 2 {
        return Some(t[i]);
    }
    let scale = t[hi] - t[lo];
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for k in lo..=hi {
        let x = (t[k] - t[i]) / scale;
        let v = nalgebra::Vector3::new(1.0, x, x * x);
        a += v * v.transpose();
        b += v * y[k];
    }
    let c = a.lu().solve(&b)?;
    if !(c[2] < 0.0) {
        return Some(t[i]);
    }
    Some(t[i] - 0.5 * c[1] / c[2] * scale)
}

pub fn run_fig2a(config: &ExperimentConfig) -> Result<Fig2a> {
    let numerics = config.numerics()?;
    let thermal = config.thermal()?;
    let params = config.lab()?.params()?;
    if params.omega_d != 0.0 {
        return Err(Error::Config("the SWAP experiment runs without the carrier drive".into()));
    }
    let sim = two_ion_simulator(params, numerics.n_max, numerics)?;
    let j = compute_j_eff(sim.couplings())?;
    let swap_time = j.swap_time().expect("two ions");
    let t_end = numerics.swap_periods * swap_time;
    let mut times = uniform_grid(t_end, numerics.record_points);
    if swap_time <= t_end {
        times.push(swap_time);
        times.sort_by(f64::total_cmp);
        times.dedup();
    }
    let (i10, i01) = (two_qubit_index("10")?, two_qubit_index("01")?);
    let input = BellTarget::PsiMinus.input();
    let mut traces = Vec::new();
    let mut warnings = Vec::new();
    for &nbar in &thermal.nbar {
        let spec = thermal.spec(nbar, numerics.n_max)?;
        let r = sim.evolve_thermal(&input, &spec, &PulseSchedule::empty(), None, t_end, &times)?;
        warnings.extend(r.warnings.iter().map(|w| format!("nbar {nbar}: {w}")));
        let p10: Vec<f64> = r.populations.iter().map(|p| p[i10]).collect();
        let p01: Vec<f64> = r.populations.iter().map(|p| p[i01]).collect();
        let eff: Vec<(f64, f64)> = times.iter().map(|&t| xy_swap_probabilities(&j, t)).collect::<Result<_>>()?;
        let grid: Vec<f64> = uniform_grid(t_end, numerics.record_points);
        let on_grid: Vec<f64> = grid
            .iter()
            .map(|g| p01[times.iter().position(|t| t == g).expect("grid time recorded")])
            .collect();
        let k_swap = times.iter().position(|&t| t == swap_time);
        traces.push(SwapTrace {
            nbar,
            peak_time: peak_before(&grid, &on_grid, 1.5 * swap_time),
            amplitude_at_swap: k_swap.map_or(f64::NAN, |k| p01[k]),
            times: times.clone(),
            p10_exact: p10,
            p01_exact: p01,
            p10_eff: eff.iter().map(|e| e.0).collect(),
            p01_eff: eff.iter().map(|e| e.1).collect(),
            physical_mass: r.metadata.physical_mass,
        });
    }
    Ok(Fig2a {
        swap_time,
        traces,
        warnings,
    })
}

fn nbar_tag(nbar: f64) -> String {
    format!("{nbar}").replace('.', "p")
}

impl Fig2a {
    pub fn output(&self) -> ExperimentOutput {
        let tables = self
            .traces
            .iter()
            .map(|tr| {
                let mut t = Table::new(
                    format!("fig2a_swap_nbar{}", nbar_tag(tr.nbar)),
                    &["t", "P10_exact", "P01_exact", "P10_eff", "P01_eff"],
                );
                for k in 0..tr.times.len() {
                    t.push(vec![tr.times[k], tr.p10_exact[k], tr.p01_exact[k], tr.p10_eff[k], tr.p01_eff[k]]);
                }
                t.meta("nbar", tr.nbar);
                t.meta("swap_time_eff_s", self.swap_time);
                t.meta("p01_peak_time_s", tr.peak_time.map_or("none".into(), |p| p.to_string()));
                t.meta("p01_at_swap_time", tr.amplitude_at_swap);
                t.meta("physical_thermal_mass", tr.physical_mass);
                t
            })
            .collect();
        ExperimentOutput {
            tables,
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellPoint {
    pub nbar: f64,
    /// Carrier Rabi frequency (rad/s).
    pub omega_d: f64,
    pub omega_d_over_omega_z: f64,
    pub t_final: f64,
    pub fidelity: f64,
    pub error: f64,
    pub peak_on_edge: bool,
    pub physical_mass: f64,
}

#[derive(Debug, Clone)]
pub struct Fig2b {
    pub t_gate: f64,
    pub points: Vec<BellPoint>,
    pub warnings: Vec<String>,
}

impl Fig2b {
    pub fn error_at(&self, nbar: f64, ratio: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.nbar == nbar && p.omega_d_over_omega_z == ratio)
            .map(|p| p.error)
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new(
            "fig2b_thermal",
            &["nbar", "Omega_d_hz", "Omega_d_over_omega_z", "t_f", "bell_error", "peak_on_edge"],
        );
        for p in &self.points {
            t.push(vec![
                p.nbar,
                p.omega_d / (2.0 * std::f64::consts::PI),
                p.omega_d_over_omega_z,
                p.t_final,
                p.error,
                if p.peak_on_edge { 1.0 } else { 0.0 },
            ]);
        }
        t.meta("t_gate_s", self.t_gate);
        t.meta("target", BellTarget::PsiMinus.name());
        ExperimentOutput {
            tables: vec![t],
            warnings: self.warnings.clone(),
        }
    }
}

pub fn run_fig2b(config: &ExperimentConfig) -> Result<Fig2b> {
    let numerics = config.numerics()?;
    let thermal = config.thermal()?;
    let base = config.lab()?.params()?;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    let mut t_gate = f64::NAN;
    for &ratio in &config.drive()?.omega_d_over_omega_z {
        let params = LabParams {
            omega_d: ratio * base.omega_z,
            ..base
        };
        let sim = two_ion_simulator(params, numerics.n_max, numerics)?;
        t_gate = gate_time(&sim)?;
        let grid = scan_grid(t_gate, numerics.scan_span, numerics.scan_points)?;
        for &nbar in &thermal.nbar {
            let spec = thermal.spec(nbar, numerics.n_max)?;
            let mix = spec.branches(sim.layout().num_modes())?;
            warnings.extend(mix.warning.iter().map(|w| format!("nbar {nbar}: {w}")));
            let scan = bell_scan(&sim, BellTarget::PsiMinus, &spec, None, &grid, numerics.echo)?;
            points.push(BellPoint {
                nbar,
                omega_d: params.omega_d,
                omega_d_over_omega_z: ratio,
                t_final: scan.best.t_final,
                fidelity: scan.best.fidelity,
                error: 1.0 - scan.best.fidelity,
                peak_on_edge: scan.peak_on_edge,
                physical_mass: mix.physical_mass,
            });
        }
    }
    warnings.sort();
    warnings.dedup();
    Ok(Fig2b {
        t_gate,
        points,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct CoherenceRun {
    pub ou: OUParams,
    pub curve: CoherenceCurve,
    pub fit: T2Fit,
}

/// Ramsey decay of a single dephased qubit from the analytic-phase fast path
/// and the fitted `T₂` for every finite entry of `noise.t2`.
pub fn run_fig4a(config: &ExperimentConfig) -> Result<Vec<CoherenceRun>> {
    let noise = config.noise()?;
    let coh = config.coherence()?;
    noise
        .t2
        .iter()
        .filter(|t| t.is_finite())
        .map(|&t2| {
            let ou = ou_from_t2(t2, noise.tau_ratio, noise.seed)?;
            let times = uniform_grid(coh.t_end_over_t2 * t2, coh.points);
            let curve = coherence_fast_path(&ou, &times, coh.trajectories)?;
            let fit = fit_t2(&curve, coh.fit_from_tau * ou.tau)?;
            Ok(CoherenceRun { ou, curve, fit })
        })
        .collect()
}

pub fn fig4a_output(runs: &[CoherenceRun]) -> ExperimentOutput {
    let tables = runs
        .iter()
        .map(|r| {
            let t2 = r.ou.t2();
            let mut t = Table::new(
                format!("fig4a_coherence_t2_{:.3}ms", t2 * 1e3).replace('.', "p"),
                &["t", "coherence", "stderr", "analytic"],
            );
            for k in 0..r.curve.times.len() {
                t.push(vec![r.curve.times[k], r.curve.mean[k], r.curve.stderr[k], r.curve.analytic[k]]);
            }
            t.meta("configured_t2_s", t2);
            t.meta("tau_s", r.ou.tau);
            t.meta("c", r.ou.c);
            t.meta("seed", r.ou.seed);
            t.meta("trajectories", r.curve.trajectories);
            t.meta("fitted_t2_s", r.fit.t2);
            t.meta("fitted_t2_stderr_s", r.fit.t2_stderr);
            t.meta("fit_points", r.fit.points_used);
            t
        })
        .collect();
    ExperimentOutput {
        tables,
        warnings: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGatePoint {
    pub t2: f64,
    pub t_final: f64,
    pub fidelity: f64,
    pub stderr: f64,
    pub error: f64,
    pub trajectories: usize,
}

/// Bell error of `|Φ⁻⟩` from `|11⟩` at one dephasing time. The final time is
/// scanned over `noisy_scan_points` around `t_center`, the noiseless optimum.
pub fn noise_gate_point(
    sim: &Simulator,
    thermal: &ThermalSpec,
    noise: &NoiseConfig,
    numerics: &NumericsConfig,
    t2: f64,
    t_center: f64,
) -> Result<NoiseGatePoint> {
    let spec = noise_spec(noise, t2)?;
    let grid = scan_grid(t_center, numerics.noisy_scan_span, numerics.noisy_scan_points)?;
    let scan = bell_scan(sim, BellTarget::PhiMinus, thermal, spec.as_ref(), &grid, numerics.echo)?;
    Ok(NoiseGatePoint {
        t2,
        t_final: scan.best.t_final,
        fidelity: scan.best.fidelity,
        stderr: scan.best.stderr,
        error: 1.0 - scan.best.fidelity,
        trajectories: spec.map_or(0, |s| s.trajectories),
    })
}

#[derive(Debug, Clone)]
pub struct Fig4b {
    pub t_gate: f64,
    /// Optimal final time without noise.
    pub t_noiseless: f64,
    pub points: Vec<NoiseGatePoint>,
}

pub fn run_fig4b(config: &ExperimentConfig) -> Result<Fig4b> {
    let numerics = config.numerics()?;
    let noise = config.noise()?;
    let thermal = config.thermal()?;
    let params = config.lab()?.params()?;
    let n_max = numerics.noisy_n_max;
    let sim = two_ion_simulator(params, n_max, numerics)?;
    let t_gate = gate_time(&sim)?;
    let spec = thermal.spec(thermal.nbar[0], n_max)?;
    let grid = scan_grid(t_gate, numerics.scan_span, numerics.scan_points)?;
    let clean = bell_scan(&sim, BellTarget::PhiMinus, &spec, None, &grid, numerics.echo)?;
    let points = noise
        .t2
        .iter()
        .map(|&t2| {
            if t2.is_infinite() {
                Ok(NoiseGatePoint {
                    t2,
                    t_final: clean.best.t_final,
                    fidelity: clean.best.fidelity,
                    stderr: 0.0,
                    error: 1.0 - clean.best.fidelity,
                    trajectories: 0,
                })
            } else {
                noise_gate_point(&sim, &spec, noise, numerics, t2, clean.best.t_final)
            }
        })
        .collect::<Result<_>>()?;
    Ok(Fig4b {
        t_gate,
        t_noiseless: clean.best.t_final,
        points,
    })
}

impl Fig4b {
    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new("fig4b_noise", &["t2", "t_f", "bell_error", "stderr", "trajectories"]);
        for p in &self.points {
            t.push(vec![p.t2, p.t_final, p.error, p.stderr, p.trajectories as f64]);
        }
        t.meta("t_gate_s", self.t_gate);
        t.meta("t_noiseless_optimum_s", self.t_noiseless);
        t.meta("target", BellTarget::PhiMinus.name());
        ExperimentOutput {
            tables: vec![t],
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPoint {
    pub t2: f64,
    pub t_final: f64,
    pub fe: Estimate,
    pub haar: Estimate,
    /// `1 − (4F_e + 1)/5`.
    pub eps_aa: f64,
    /// `1 − F_haar`.
    pub eps_hm: f64,
    /// Standard error of `eps_hm − eps_aa`.
    pub stderr: f64,
}

impl ChannelPoint {
    pub fn deviation(&self) -> f64 {
        self.eps_hm - self.eps_aa
    }
}

/// Both channel-error estimators for one simulated configuration.
pub fn channel_point(
    sim: &Simulator,
    thermal: &ThermalSpec,
    noise: Option<NoiseSpec>,
    haar: &HaarConfig,
    t_final: f64,
    echo: bool,
) -> Result<ChannelPoint> {
    let t2 = noise.map_or(f64::INFINITY, |n| n.ou.t2());
    let ch = SimulatedChannel::new(sim, thermal.clone(), schedule_for(t_final, echo)?, noise, t_final)?;
    let v = ch.reference()?;
    let fe = entanglement_fidelity(&ch, &v)?;
    let h = haar_channel_fidelity(&ch, &v, haar.states, haar.seed)?;
    let (_, stderr) = relation_deviation(&fe, &h);
    Ok(ChannelPoint {
        t2,
        t_final,
        fe,
        haar: h,
        eps_aa: 1.0 - channel_fidelity(fe.mean),
        eps_hm: 1.0 - h.mean,
        stderr,
    })
}

/// Final time maximizing the noiseless entanglement fidelity.
pub fn optimal_channel_time(sim: &Simulator, thermal: &ThermalSpec, grid: &[f64], echo: bool) -> Result<f64> {
    let scan = bell_fidelity(grid, |tf| {
        let ch = SimulatedChannel::new(sim, thermal.clone(), schedule_for(tf, echo)?, None, tf)?;
        Ok((entanglement_fidelity(&ch, &ch.reference()?)?.mean, 0.0))
    })?;
    Ok(scan.best.t_final)
}

#[derive(Debug, Clone)]
pub struct ChannelError {
    pub points: Vec<ChannelPoint>,
}

pub fn run_channel_error(config: &ExperimentConfig) -> Result<ChannelError> {
    let numerics = config.numerics()?;
    let noise = config.noise()?;
    let thermal = config.thermal()?;
    let haar = config.haar()?;
    let params = config.lab()?.params()?;
    let n_max = numerics.noisy_n_max;
    let sim = two_ion_simulator(params, n_max, numerics)?;
    let spec = thermal.spec(thermal.nbar[0], n_max)?;
    let grid = scan_grid(gate_time(&sim)?, numerics.scan_span, numerics.scan_points)?;
    let tf = optimal_channel_time(&sim, &spec, &grid, numerics.echo)?;
    let points = noise
        .t2
        .iter()
        .map(|&t2| channel_point(&sim, &spec, noise_spec(noise, t2)?, haar, tf, numerics.echo))
        .collect::<Result<_>>()?;
    Ok(ChannelError { points })
}

impl ChannelError {
    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new(
            "channel_error",
            &["t2", "t_f", "F_e", "F_e_stderr", "F_channel", "haar_estimate", "haar_stderr", "eps_AA", "eps_HM", "stderr"],
        );
        for p in &self.points {
            t.push(vec![
                p.t2,
                p.t_final,
                p.fe.mean,
                p.fe.stderr,
                channel_fidelity(p.fe.mean),
                p.haar.mean,
                p.haar.stderr,
                p.eps_aa,
                p.eps_hm,
                p.stderr,
            ]);
        }
        ExperimentOutput {
            tables: vec![t],
            warnings: Vec::new(),
        }
    }
}

/// A Bell scan for the configured target at every `n̄`, with noise from the
/// first entry of `noise.t2` when a `[noise]` section is given.
pub fn run_custom(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let numerics = config.numerics()?;
    let thermal = config.thermal()?;
    let params = config.lab()?.params()?;
    let target: BellTarget = numerics.target.parse()?;
    let noise = match &config.noise {
        Some(n) => noise_spec(n, n.t2[0])?,
        None => None,
    };
    let n_max = if noise.is_some() { numerics.noisy_n_max } else { numerics.n_max };
    let sim = two_ion_simulator(params, n_max, numerics)?;
    let grid = scan_grid(gate_time(&sim)?, numerics.scan_span, numerics.scan_points)?;
    let mut t = Table::new("custom", &["nbar", "t_f", "fidelity", "stderr", "error"]);
    let mut warnings = Vec::new();
    for &nbar in &thermal.nbar {
        let spec = thermal.spec(nbar, n_max)?;
        warnings.extend(spec.branches(2)?.warning);
        let s = bell_scan(&sim, target, &spec, noise.as_ref(), &grid, numerics.echo)?;
        t.push(vec![nbar, s.best.t_final, s.best.fidelity, s.best.stderr, 1.0 - s.best.fidelity]);
    }
    t.meta("target", target.name());
    Ok(ExperimentOutput {
        tables: vec![t],
        warnings,
    })
}

/// Dt-halving and cutoff probe of the configured Bell gate at the predicted
/// gate time.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let numerics = config.numerics()?;
    let thermal = config.thermal()?;
    let params = config.lab()?.params()?;
    let target: BellTarget = numerics.target.parse()?;
    let noise = match &config.noise {
        Some(n) => noise_spec(n, n.t2[0])?,
        None => None,
    };
    let n_max = if noise.is_some() { numerics.noisy_n_max } else { numerics.n_max };
    let sim = two_ion_simulator(params, n_max, numerics)?;
    let tg = gate_time(&sim)?;
    convergence_probe(&ProbeCase {
        params,
        num_ions: 2,
        n_max,
        options: numerics.sim_options()?,
        spin_state: target.input(),
        nbar: thermal.nbar[0],
        thermal_tolerance: thermal.tolerance,
        schedule: schedule_for(tg, numerics.echo)?,
        noise,
        t_final: tg,
        record_times: vec![0.5 * tg, tg],
        target: Some(target.state(params.phi_d)),
    })
}

pub fn convergence_output(r: &ConvergenceReport) -> ExperimentOutput {
    let mut t = Table::new(
        "convergence",
        &["dt", "n_max", "dt_drift", "nmax_drift", "fidelity_dt_drift", "fidelity_nmax_drift", "fidelity"],
    );
    t.push(vec![
        r.dt,
        r.n_max as f64,
        r.dt_drift,
        r.nmax_drift,
        r.fidelity_dt_drift.unwrap_or(f64::NAN),
        r.fidelity_nmax_drift.unwrap_or(f64::NAN),
        r.base_fidelity.as_ref().and_then(|f| f.last().copied()).unwrap_or(f64::NAN),
    ]);
    ExperimentOutput {
        tables: vec![t],
        warnings: Vec::new(),
    }
}

/// Polaron identities for the configured crystal with the sideband couplings
/// rescaled so that `max |F/2δ| = half_ratio`.
pub fn run_polaron_check(
    config: &ExperimentConfig,
    n_max: usize,
    half_ratio: f64,
    headroom: usize,
) -> Result<PolaronReport> {
    let lab = config.lab()?;
    let params = lab.params()?;
    let trap = params.trap(lab.num_ions)?;
    let modes = compute_modes(&trap, &solve_equilibrium(&trap)?)?;
    let mut c = sideband_couplings(&params, &modes)?;
    let r = c.coupling_ratio();
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("polaron check needs a non-zero sideband coupling".into()));
    }
    let s = Complex64::new(2.0 * half_ratio / r, 0.0);
    c.f.iter_mut().for_each(|z| *z *= s);
    let layout = SpaceLayout::new(lab.num_ions, c.num_modes(), n_max)?;
    polaron_transform_check(&c, &layout, headroom)
}

pub fn polaron_output(r: &PolaronReport) -> ExperimentOutput {
    let mut t = Table::new(
        "polaron_check",
        &["n_max", "headroom", "interior_states", "displacement_residual", "spin_residual", "spin_residual_single_angle", "parity_defect"],
    );
    t.push(vec![
        r.n_max as f64,
        r.headroom as f64,
        r.interior_states as f64,
        r.displacement_residual,
        r.spin_residual,
        r.spin_residual_single_angle,
        r.parity_defect,
    ]);
    ExperimentOutput {
        tables: vec![t],
        warnings: Vec::new(),
    }
}

/// Phase-space trajectories of the Trotterized spin-dependent force.
pub fn run_force_demo(kind: ForceKind, steps: usize) -> Result<ExperimentOutput> {
    let demo = trotter_force_demo(kind, steps, &ForceDemoParams::reference())?;
    let mut t = Table::new("force_demo", &["branch", "step", "re_a", "im_a"]);
    for (b, br) in demo.branches.iter().enumerate() {
        for (k, z) in br.points.iter().enumerate() {
            t.push(vec![b as f64, k as f64, z.re, z.im]);
        }
        t.meta(&format!("branch_{b}"), br.label);
        t.meta(&format!("branch_{b}_closure"), br.closure());
        t.meta(&format!("branch_{b}_final_phase"), br.final_phase);
    }
    t.meta("discrete_area_phase", demo.discrete_area_phase);
    t.meta("analytic_area_phase", demo.analytic_area_phase);
    Ok(ExperimentOutput {
        tables: vec![t],
        warnings: Vec::new(),
    })
}

/// Runs the experiment named in `config`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Modes => run_modes(config),
        ExperimentKind::Jeff => run_jeff(config),
        ExperimentKind::Fig2aSwap => Ok(run_fig2a(config)?.output()),
        ExperimentKind::Fig2bThermal => Ok(run_fig2b(config)?.output()),
        ExperimentKind::Fig4aCoherence => Ok(fig4a_output(&run_fig4a(config)?)),
        ExperimentKind::Fig4bNoise => Ok(run_fig4b(config)?.output()),
        ExperimentKind::ChannelError => Ok(run_channel_error(config)?.output()),
        ExperimentKind::Custom => run_custom(config),
    }
}

#[cfg(test)]
mod tests;
