use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("equilibrium solver did not converge (last residual {residual:e} after {iterations} iterations)")]
    SolverFailure { residual: f64, iterations: usize },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("{kind} index {index} out of range (size {size})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    #[error("mode {mode} is resonant (detuning {detuning:e} rad/s)")]
    Resonance { mode: usize, detuning: f64 },

    #[error("matrix norm {norm:e} too large for a reliable matrix function")]
    NormOverflow { norm: f64 },

    #[error("layout dimension {dim} exceeds the dense limit {limit}")]
    LayoutTooLarge { dim: usize, limit: usize },

    #[error("time step too coarse: |H|*dt = {norm_dt:.3} exceeds {limit}")]
    StepTooCoarse { norm_dt: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("non-physical result: {0}")]
    NonPhysical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
