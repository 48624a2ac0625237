use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An analytic curve was evaluated at its pole.
    #[error("pole at pump-cavity detuning {delta_cav}")]
    PoleAtDetuning { delta_cav: f64 },

    /// The response function f vanished; only possible for exactly lossless parameters.
    #[error("singular resonance: response function vanishes at delta = {delta}, delta_cav = {delta_cav}")]
    ResonanceSingular { delta: f64, delta_cav: f64 },

    #[error("expansion is singular at a node of the standing wave")]
    NodeSingular,

    #[error("degenerate optimum: {0}")]
    DegenerateOptimum(String),

    #[error("population at the truncation level {level} reached {population:.3e} at t = {time}")]
    TruncationOverflow {
        level: usize,
        population: f64,
        time: f64,
    },

    #[error("Hilbert dimension {dim} exceeds the guard {max}")]
    DimensionGuard { dim: usize, max: usize },

    #[error("steady-state solve did not converge: residual {residual:.3e} > tol {tol:.3e}")]
    NonConvergence { residual: f64, tol: f64 },

    #[error("top motional level holds {top_population:.3e} of the population (mean_m = {mean_m})")]
    TruncationSuspect { top_population: f64, mean_m: f64 },

    #[error("slowest motional modes are not separated: {first} vs {second}")]
    ModeIdentificationAmbiguous { first: f64, second: f64 },

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
