use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate grid: need at least 3 interior nodes per axis, got {0}")]
    DegenerateGrid(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("singular evaluation: g evaluated at nonpositive argument {value} (node {node})")]
    SingularEvaluation { node: usize, value: f64 },
    #[error("Keller-Osserman violation: g is not integrable at the origin")]
    KellerOsserman,
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("line search stagnated (residual {residual:.3e})")]
    Stagnation { residual: f64 },
    #[error("factorization failed: zero pivot at row {0}")]
    Factorization(usize),
    #[error("collar error: {0}")]
    Collar(String),
    #[error("ordering error: sub exceeds super at node {node} by {excess:.3e}")]
    Ordering { node: usize, excess: f64 },
    #[error("positivity violation: min interior value {0:.3e}")]
    PositivityViolation(f64),
    #[error("degenerate solution: iterates collapsed to zero")]
    DegenerateSolution,
    #[error("sub-solution not certified: lambda below threshold {threshold:.6e}")]
    SubsolutionNotCertified { threshold: f64 },
    #[error("argument error: {0}")]
    Argument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of an iterative method rather than of the input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::Stagnation { .. }
                | Error::Factorization(_)
                | Error::DegenerateSolution
                | Error::PositivityViolation(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
