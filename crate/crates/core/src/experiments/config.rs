//! Experiment configuration. Frequencies are ordinary frequencies in Hz and
//! times are in seconds; conversion to angular units happens here.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::LabParams;
use crate::propagate::{IntegratorKind, SimOptions, ThermalSampling, ThermalSpec};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig2aSwap,
    Fig2bThermal,
    Fig4aCoherence,
    Fig4bNoise,
    ChannelError,
    Modes,
    Jeff,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2aSwap => "fig2a_swap",
            ExperimentKind::Fig2bThermal => "fig2b_thermal",
            ExperimentKind::Fig4aCoherence => "fig4a_coherence",
            ExperimentKind::Fig4bNoise => "fig4b_noise",
            ExperimentKind::ChannelError => "channel_error",
            ExperimentKind::Modes => "modes",
            ExperimentKind::Jeff => "jeff",
            ExperimentKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub num_ions: usize,
    pub qubit_frequency_hz: f64,
    pub trap_x_hz: f64,
    pub trap_z_hz: f64,
    pub eta: f64,
    /// Red-sideband detuning from the centre-of-mass mode.
    pub delta_l_hz: f64,
    pub omega_l_hz: f64,
    pub omega_d_hz: f64,
    pub phi_l: f64,
    pub phi_d: f64,
    pub b0_tesla: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            num_ions: 2,
            qubit_frequency_hz: 1.8e9,
            trap_x_hz: 4e6,
            trap_z_hz: 1e6,
            eta: 0.2,
            delta_l_hz: 800e3,
            omega_l_hz: 500e3,
            omega_d_hz: 5.2e6,
            phi_l: 0.0,
            phi_d: 0.0,
            b0_tesla: 4e-3,
        }
    }
}

impl LabConfig {
    pub fn params(&self) -> Result<LabParams> {
        let p = LabParams {
            omega0: TWO_PI * self.qubit_frequency_hz,
            omega_x: TWO_PI * self.trap_x_hz,
            omega_z: TWO_PI * self.trap_z_hz,
            eta: self.eta,
            delta_l: TWO_PI * self.delta_l_hz,
            omega_l: TWO_PI * self.omega_l_hz,
            omega_d: TWO_PI * self.omega_d_hz,
            phi_l: self.phi_l,
            phi_d: self.phi_d,
            b0: self.b0_tesla,
        };
        p.validate()?;
        if self.num_ions == 0 {
            return Err(Error::Config("num_ions must be positive".into()));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalConfig {
    pub nbar: Vec<f64>,
    /// Branch enumeration stops once the retained mass exceeds `1 − tolerance`.
    pub tolerance: f64,
    /// Sample this many branches instead of enumerating them.
    pub monte_carlo_samples: Option<usize>,
    pub seed: u64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self {
            nbar: vec![0.0],
            tolerance: 1e-4,
            monte_carlo_samples: None,
            seed: 1,
        }
    }
}

impl ThermalConfig {
    pub fn spec(&self, nbar: f64, n_max: usize) -> Result<ThermalSpec> {
        let mut s = ThermalSpec::new(nbar, n_max, self.tolerance)?;
        if let Some(samples) = self.monte_carlo_samples {
            s.sampling = ThermalSampling::MonteCarlo {
                samples,
                seed: self.seed,
            };
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Dephasing times in seconds; `inf` switches the noise off.
    pub t2: Vec<f64>,
    /// Correlation time as a fraction of `T₂`.
    pub tau_ratio: f64,
    pub trajectories: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            t2: vec![f64::INFINITY, 5e-3],
            tau_ratio: 0.1,
            trajectories: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Fock cutoff of noiseless runs.
    pub n_max: usize,
    /// Fock cutoff of runs with dephasing noise.
    pub noisy_n_max: usize,
    /// Noise cell length and RK4 step (s).
    pub dt: f64,
    pub integrator: String,
    pub counter_rotating: bool,
    pub scan_points: usize,
    /// Half-width of the final-time scan as a fraction of the gate time.
    pub scan_span: f64,
    pub noisy_scan_points: usize,
    pub noisy_scan_span: f64,
    /// Length of the SWAP traces in units of the XY SWAP time.
    pub swap_periods: f64,
    pub record_points: usize,
    pub echo: bool,
    /// Bell target of custom runs.
    pub target: String,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            n_max: 10,
            noisy_n_max: 5,
            dt: 1e-6,
            integrator: "auto".into(),
            counter_rotating: false,
            scan_points: 41,
            scan_span: 0.1,
            noisy_scan_points: 3,
            noisy_scan_span: 0.01,
            swap_periods: 2.0,
            record_points: 201,
            echo: true,
            target: "psi_minus".into(),
        }
    }
}

impl NumericsConfig {
    pub fn sim_options(&self) -> Result<SimOptions> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(SimOptions {
            integrator: self.integrator.parse::<IntegratorKind>()?,
            dt: self.dt,
            counter_rotating: self.counter_rotating,
            ..SimOptions::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// Carrier Rabi frequencies swept in fig2b, in units of the axial trap frequency.
    pub omega_d_over_omega_z: Vec<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            omega_d_over_omega_z: vec![0.0, 2.0, 3.8, 5.2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HaarConfig {
    pub states: usize,
    pub seed: u64,
}

impl Default for HaarConfig {
    fn default() -> Self {
        Self { states: 100, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub trajectories: usize,
    /// Trace length in units of `T₂`.
    pub t_end_over_t2: f64,
    pub points: usize,
    /// The decay fit starts at this many correlation times.
    pub fit_from_tau: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            trajectories: 5000,
            t_end_over_t2: 2.0,
            points: 41,
            fit_from_tau: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lab: Option<LabConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<NumericsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haar: Option<HaarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<CoherenceConfig>,
}

fn need<'a, T>(block: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T> {
    block
        .as_ref()
        .ok_or_else(|| Error::Config(format!("experiment '{}' needs a [{name}] section", kind.name())))
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`, sized for minutes-long runs.
    pub fn desk(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            output: None,
            lab: Some(LabConfig::default()),
            thermal: None,
            noise: None,
            numerics: None,
            drive: None,
            haar: None,
            coherence: None,
        };
        match kind {
            ExperimentKind::Modes | ExperimentKind::Jeff => {}
            ExperimentKind::Fig2aSwap => {
                c.lab.as_mut().unwrap().omega_d_hz = 0.0;
                c.thermal = Some(ThermalConfig {
                    nbar: vec![0.0, 0.1, 1.0, 2.0],
                    ..ThermalConfig::default()
                });
                c.numerics = Some(NumericsConfig::default());
            }
            ExperimentKind::Fig2bThermal => {
                c.thermal = Some(ThermalConfig {
                    nbar: vec![0.0, 1.0, 2.0],
                    ..ThermalConfig::default()
                });
                c.numerics = Some(NumericsConfig::default());
                c.drive = Some(DriveConfig::default());
            }
            ExperimentKind::Fig4aCoherence => {
                c.noise = Some(NoiseConfig {
                    t2: vec![5e-3],
                    ..NoiseConfig::default()
                });
                c.coherence = Some(CoherenceConfig::default());
            }
            ExperimentKind::Fig4bNoise => {
                c.thermal = Some(ThermalConfig::default());
                c.noise = Some(NoiseConfig {
                    t2: vec![f64::INFINITY, 5e-3, 2e-3, 1e-3],
                    ..NoiseConfig::default()
                });
                c.numerics = Some(NumericsConfig::default());
            }
            ExperimentKind::ChannelError => {
                c.thermal = Some(ThermalConfig::default());
                c.noise = Some(NoiseConfig {
                    t2: vec![f64::INFINITY, 5e-3, 2e-3, 1e-3],
                    trajectories: 20,
                    ..NoiseConfig::default()
                });
                c.numerics = Some(NumericsConfig::default());
                c.haar = Some(HaarConfig::default());
            }
            ExperimentKind::Custom => {
                c.thermal = Some(ThermalConfig::default());
                c.numerics = Some(NumericsConfig::default());
            }
        }
        c
    }

    /// Raises cutoffs and sample counts to the full figure sizes.
    pub fn full_scale(mut self) -> Self {
        match self.experiment {
            ExperimentKind::Fig2aSwap => {
                if let Some(n) = self.numerics.as_mut() {
                    n.n_max = 20;
                }
                if let Some(t) = self.thermal.as_mut() {
                    t.nbar = vec![0.0, 0.1, 1.0, 2.0, 4.0];
                }
            }
            ExperimentKind::Fig2bThermal => {
                if let Some(n) = self.numerics.as_mut() {
                    n.n_max = 14;
                }
            }
            ExperimentKind::Fig4bNoise => {
                if let Some(n) = self.noise.as_mut() {
                    n.trajectories = 5000;
                }
            }
            ExperimentKind::ChannelError => {
                if let Some(n) = self.noise.as_mut() {
                    n.trajectories = 5000;
                    n.t2 = std::iter::once(f64::INFINITY).chain((1..=10).map(|k| 0.5e-3 * k as f64)).collect();
                }
                if let Some(h) = self.haar.as_mut() {
                    h.states = 1000;
                }
            }
            _ => {}
        }
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks that every section the experiment reads is present and sane.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let k = self.experiment;
        let lab = need(&self.lab, "lab", k)?;
        lab.params()?;
        let two_ions = || {
            if lab.num_ions != 2 {
                return Err(Error::Config(format!("experiment '{}' needs num_ions = 2", k.name())));
            }
            Ok(())
        };
        if matches!(k, Fig2aSwap | Fig2bThermal | Fig4bNoise | ChannelError | Custom) {
            two_ions()?;
            let t = need(&self.thermal, "thermal", k)?;
            if t.nbar.is_empty() || t.nbar.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
                return Err(Error::Config("thermal.nbar must be a non-empty list of finite values >= 0".into()));
            }
            let n = need(&self.numerics, "numerics", k)?;
            n.sim_options()?;
            if n.scan_points == 0 || n.noisy_scan_points == 0 || n.record_points < 2 {
                return Err(Error::Config("scan and record point counts must be positive".into()));
            }
        }
        if k == Fig2aSwap && lab.omega_d_hz != 0.0 {
            return Err(Error::Config("fig2a_swap is the undriven experiment; set lab.omega_d_hz = 0".into()));
        }
        if k == Fig2bThermal {
            let d = need(&self.drive, "drive", k)?;
            if d.omega_d_over_omega_z.is_empty() || d.omega_d_over_omega_z.iter().any(|r| !(*r >= 0.0)) {
                return Err(Error::Config("drive.omega_d_over_omega_z must be a non-empty list of values >= 0".into()));
            }
        }
        if matches!(k, Fig4aCoherence | Fig4bNoise | ChannelError) {
            let n = need(&self.noise, "noise", k)?;
            if n.t2.is_empty() || n.t2.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Config("noise.t2 must be a non-empty list of positive times".into()));
            }
            if !(n.tau_ratio > 0.0 && n.tau_ratio < 1.0) || n.trajectories == 0 {
                return Err(Error::Config("noise.tau_ratio must lie in (0, 1) and trajectories be positive".into()));
            }
        }
        if k == Fig4aCoherence {
            let c = need(&self.coherence, "coherence", k)?;
            if c.trajectories < 2 || c.points < 3 || !(c.t_end_over_t2 > 0.0) {
                return Err(Error::Config("coherence needs >= 2 trajectories, >= 3 points and a positive length".into()));
            }
        }
        if k == ChannelError {
            need(&self.haar, "haar", k)?;
        }
        Ok(())
    }

    pub fn lab(&self) -> Result<&LabConfig> {
        need(&self.lab, "lab", self.experiment)
    }

    pub fn thermal(&self) -> Result<&ThermalConfig> {
        need(&self.thermal, "thermal", self.experiment)
    }

    pub fn noise(&self) -> Result<&NoiseConfig> {
        need(&self.noise, "noise", self.experiment)
    }

    pub fn numerics(&self) -> Result<&NumericsConfig> {
        need(&self.numerics, "numerics", self.experiment)
    }

    pub fn drive(&self) -> Result<&DriveConfig> {
        need(&self.drive, "drive", self.experiment)
    }

    pub fn haar(&self) -> Result<&HaarConfig> {
        need(&self.haar, "haar", self.experiment)
    }

    pub fn coherence(&self) -> Result<&CoherenceConfig> {
        need(&self.coherence, "coherence", self.experiment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_configs_validate_and_round_trip() {
        use ExperimentKind::*;
        for k in [Fig2aSwap, Fig2bThermal, Fig4aCoherence, Fig4bNoise, ChannelError, Modes, Jeff, Custom] {
            for c in [ExperimentConfig::desk(k), ExperimentConfig::desk(k).full_scale()] {
                c.validate().unwrap();
                let text = c.to_toml().unwrap();
                assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c, "{text}");
            }
        }
    }

    #[test]
    fn frequencies_are_converted_to_angular_units() {
        let p = LabConfig::default().params().unwrap();
        assert_eq!(p, LabParams::reference());
    }

    #[test]
    fn missing_sections_are_reported() {
        let err = ExperimentConfig::from_toml("experiment = \"fig2b_thermal\"\n[lab]\n").unwrap_err();
        assert!(err.to_string().contains("[thermal]"), "{err}");
        let err = ExperimentConfig::from_toml("experiment = \"modes\"\n").unwrap_err();
        assert!(err.to_string().contains("[lab]"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"modes\"\n[lab]\ntrap_y_hz = 1.0\n").is_err());
    }

    #[test]
    fn infinite_t2_parses() {
        let c = ExperimentConfig::from_toml(
            "experiment = \"fig4a_coherence\"\n[lab]\n[noise]\nt2 = [inf, 5e-3]\n[coherence]\n",
        )
        .unwrap();
        assert!(c.noise().unwrap().t2[0].is_infinite());
    }
}
