use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("vertex index {index} out of range for curve with {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("quadrature too coarse: {0}")]
    QuadratureUnderflow(String),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("blowup detected at t={time:.6e}: displacement {displacement:.3e} exceeds {limit:.3e}")]
    BlowupDetected { time: f64, displacement: f64, limit: f64 },
    #[error("surgery failed: {0}")]
    SurgeryFailed(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("abscissa {x} outside the window [{lo}, {hi}]")]
    OutOfWindow { x: f64, lo: f64, hi: f64 },
    #[error("invalid r={0}: the normalized wave needs r > 1")]
    InvalidR(f64),
    #[error("ambiguous tangency: argmax {argmax} vs tangency root {root}")]
    AmbiguousTangency { argmax: f64, root: f64 },
    #[error("wave validation failed: {0}")]
    ValidationFailed(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },
    #[error("scenario error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidCurve(_)
            | Error::IndexOutOfRange { .. }
            | Error::InvalidParams(_)
            | Error::OutOfWindow { .. }
            | Error::InvalidR(_)
            | Error::Schema(_)
            | Error::Io(_)
            | Error::QuadratureUnderflow(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
