use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported step rule: {0}")]
    UnsupportedRule(String),

    #[error("{what} did not converge after {iterations} iterations (best estimate {best_estimate})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        best_estimate: f64,
    },

    #[error("matrix has rank zero")]
    RankZero,

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no convergence guarantee: {0}")]
    NoGuarantee(String),

    #[error("degenerate subdifferential: {0}")]
    Degenerate(String),

    #[error("all rows were eliminated")]
    EmptySystem,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// 1 = invalid input, 2 = numeric failure, 3 = no-guarantee condition.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_)
            | Error::InvalidInput(_)
            | Error::InvalidDistribution(_)
            | Error::Precondition(_)
            | Error::UnsupportedRule(_)
            | Error::Parse { .. }
            | Error::Io(_) => 1,
            Error::ConvergenceFailure { .. }
            | Error::RankZero
            | Error::RankDeficient(_)
            | Error::Singular(_)
            | Error::Numeric(_)
            | Error::Degenerate(_)
            | Error::EmptySystem => 2,
            Error::NoGuarantee(_) => 3,
        }
    }
}
