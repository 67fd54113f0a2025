use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian: max |H - H^dagger| = {defect:e} exceeds {tolerance:e}")]
    NonHermitianInput { defect: f64, tolerance: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("negative frequency {0} passed to the spectral density")]
    NegativeFrequency(f64),

    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("quadrature did not converge: error estimate {estimate:e} above target {target:e}")]
    QuadratureNonConvergence { estimate: f64, target: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0} sensors requested, at most {max} supported", max = crate::model::MAX_SENSORS)]
    TooManySensors(usize),

    #[error("negative dissipation rate {0}")]
    NegativeRate(f64),

    #[error("phonon coupling operator is not Hermitian (defect {0:e})")]
    NonHermitianCoupling(f64),

    #[error("Liouvillian kernel is degenerate (pivot ratio {pivot_ratio:e}); a sector is decoupled")]
    DegenerateKernel { pivot_ratio: f64 },

    #[error("steady-state solve failed: {0}")]
    SingularSolve(String),

    #[error("step {dt} too large: estimated local error {estimate:e} exceeds 1e-10")]
    StepSizeTooLarge { dt: f64, estimate: f64 },

    #[error("sensor index {0} used more than once in a normal-ordered moment")]
    DuplicateSensorIndex(usize),

    #[error("sensor index {index} outside 0..{count}")]
    SensorIndexOutOfRange { index: usize, count: usize },

    #[error("frequency axes do not match: {0}")]
    AxisMismatch(String),

    #[error("found {found} spectral maxima, need at least 3")]
    PeaksNotFound { found: usize },

    #[error("{0} mode is not supported here")]
    UnsupportedMode(crate::engine::PhononMode),

    #[error("correlation propagation did not decay within {steps} steps")]
    PropagationNotConverged { steps: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
