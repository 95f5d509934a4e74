use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iongate::effective::ForceKind;
use iongate::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentOutput};

/// Tolerance on the polaron identities.
const POLARON_TOLERANCE: f64 = 1e-8;
/// Largest accepted Bell-fidelity change when the step is halved.
const DT_DRIFT_TOLERANCE: f64 = 1e-6;
/// Channel-relation bound in units of the combined stderr.
const RELATION_SIGMAS: f64 = 3.0;

#[derive(Parser)]
#[command(name = "iongate-sim", version, about = "Trapped-ion microwave gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; desk defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV tables; printed to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Paper-scale cutoffs, trajectory and state counts.
    #[arg(long, global = true)]
    full_scale: bool,
    /// Signed red-sideband detuning override in Hz.
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta_l_hz: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Normal modes and equilibrium positions.
    Modes,
    /// Effective couplings and predicted gate time.
    Jeff,
    /// Undriven swap dynamics against the XY model.
    Swap,
    /// Bell error versus temperature and drive strength.
    Bell,
    /// Single-qubit coherence under OU noise with a T2 fit.
    Coherence,
    /// Bell error of the driven gate under OU noise.
    NoiseGate,
    /// Entanglement and Haar-averaged channel fidelities.
    ChannelFidelity,
    /// Interior residuals of the polaron identities.
    PolaronCheck {
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        /// Target max |F/2δ|.
        #[arg(long, default_value_t = 0.05)]
        ratio: f64,
        /// Extra Fock levels kept beyond n_max for the exponentials.
        #[arg(long, default_value_t = 8)]
        headroom: usize,
    },
    /// Phase-space trajectories of the Trotterized force.
    ForceDemo {
        /// x, y or both.
        #[arg(long, default_value = "both")]
        force: String,
        #[arg(long, default_value_t = 4)]
        steps: usize,
    },
    /// Dt-halving and cutoff drift of the configured Bell gate.
    Convergence,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Modes => ExperimentKind::Modes,
            Command::Jeff | Command::PolaronCheck { .. } | Command::ForceDemo { .. } => ExperimentKind::Jeff,
            Command::Swap => ExperimentKind::Fig2aSwap,
            Command::Bell => ExperimentKind::Fig2bThermal,
            Command::Coherence => ExperimentKind::Fig4aCoherence,
            Command::NoiseGate => ExperimentKind::Fig4bNoise,
            Command::ChannelFidelity => ExperimentKind::ChannelError,
            Command::Convergence => ExperimentKind::Custom,
        }
    }

    /// Subcommands bound to one experiment kind reject configs for another.
    fn strict(&self) -> bool {
        !matches!(self, Command::PolaronCheck { .. } | Command::ForceDemo { .. } | Command::Convergence)
    }
}

fn load_config(cmd: &Command, common: &Common) -> Result<ExperimentConfig, String> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::desk(cmd.kind()),
    };
    if cmd.strict() && config.experiment != cmd.kind() {
        return Err(format!(
            "config is for experiment '{}' but the subcommand runs '{}'",
            config.experiment.name(),
            cmd.kind().name()
        ));
    }
    if common.full_scale {
        config = config.full_scale();
    }
    if let Some(d) = common.delta_l_hz {
        config
            .lab
            .as_mut()
            .ok_or("config has no [lab] section")?
            .delta_l_hz = d;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn execute(cmd: &Command, config: &ExperimentConfig) -> Result<(ExperimentOutput, Vec<String>), String> {
    let err = |e: iongate::Error| e.to_string();
    let mut violations = Vec::new();
    let out = match cmd {
        Command::ChannelFidelity => {
            let r = experiments::run_channel_error(config).map_err(err)?;
            for p in &r.points {
                if p.deviation().abs() >= RELATION_SIGMAS * p.stderr {
                    violations.push(format!(
                        "channel relation off by {:.3e} (stderr {:.3e}) at T2 = {:e} s",
                        p.deviation(),
                        p.stderr,
                        p.t2
                    ));
                }
            }
            r.output()
        }
        Command::PolaronCheck { n_max, ratio, headroom } => {
            let r = experiments::run_polaron_check(config, *n_max, *ratio, *headroom).map_err(err)?;
            if !(r.displacement_residual < POLARON_TOLERANCE && r.spin_residual < POLARON_TOLERANCE) {
                violations.push(format!(
                    "polaron residuals {:.3e}, {:.3e} exceed {POLARON_TOLERANCE:e}",
                    r.displacement_residual, r.spin_residual
                ));
            }
            experiments::polaron_output(&r)
        }
        Command::ForceDemo { force, steps } => {
            let kind: ForceKind = force.parse().map_err(err)?;
            experiments::run_force_demo(kind, *steps).map_err(err)?
        }
        Command::Convergence => {
            let r = experiments::run_convergence(config).map_err(err)?;
            if let Some(d) = r.fidelity_dt_drift {
                if !(d < DT_DRIFT_TOLERANCE) {
                    violations.push(format!("fidelity drift {d:.3e} under dt halving exceeds {DT_DRIFT_TOLERANCE:e}"));
                }
            }
            experiments::convergence_output(&r)
        }
        _ => experiments::run(config).map_err(err)?,
    };
    Ok((out, violations))
}

fn emit(out: &ExperimentOutput, config: &ExperimentConfig, dir: Option<&Path>) -> Result<(), String> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for path in out.write(dir, config).map_err(|e| e.to_string())? {
                println!("{}", path.display());
            }
        }
        None => {
            let text = config.to_toml().map_err(|e| e.to_string())?;
            for t in &out.tables {
                print!("{}", t.to_csv(&text));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = load_config(&cli.command, &cli.common).and_then(|config| {
        let (out, violations) = execute(&cli.command, &config)?;
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        let dir = cli.common.out.as_deref().or(config.output.as_deref());
        emit(&out, &config, dir)?;
        Ok(violations)
    });
    match result {
        Ok(v) if v.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            for m in v {
                eprintln!("invariant violated: {m}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
