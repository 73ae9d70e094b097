use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("general position violated: {0}")]
    GeneralPosition(String),
    #[error("zero entry where a nonzero value is required: {0}")]
    ZeroEntry(String),
    #[error("pole hit at {0}")]
    PoleAtX(C64),
    #[error("dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("family does not commute (relative commutator {0:.3e})")]
    NonCommuting(f64),
    #[error("non-diagonalizable{context}: residual {residual:.3e} after retries")]
    NonDiagonalizable { context: String, residual: f64 },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("collision detected at t = {t}: particles {i} and {j}")]
    CollisionDetected { t: f64, i: usize, j: usize },
    #[error("step too large at t = {t}: invariant drift {drift:.3e}")]
    StepTooLarge { t: f64, drift: f64 },
    #[error("logarithm undefined for momentum {0}")]
    LogBranch(usize),
    #[error("time depth {have} too small, need {need}")]
    DepthTooSmall { need: usize, have: usize },
    #[error("z = {0} hits the spectrum of Z0")]
    SpectrumHit(C64),
    #[error("homotopy path {path} failed at s = {s:.6e}")]
    PathFailure { path: usize, s: f64 },
    #[error("denominator collision: {0}")]
    DenominatorCollision(String),
    #[error("incomplete solution set: found {found} of {expected}")]
    IncompleteSolutionSet { found: usize, expected: usize },
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("unsupported case: {0}")]
    Unsupported(String),
}

impl Error {
    /// Whether the error stems from bad input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::IndexOutOfRange(_)
                | Error::InvalidArgument(_)
                | Error::ShapeMismatch(_)
                | Error::GeneralPosition(_)
                | Error::ZeroEntry(_)
                | Error::PoleAtX(_)
                | Error::TooLarge { .. }
                | Error::DegenerateConfiguration(_)
                | Error::DepthTooSmall { .. }
                | Error::SpectrumHit(_)
                | Error::DenominatorCollision(_)
                | Error::Unsupported(_)
        )
    }
}
