use std::path::PathBuf;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("covariance at sample {0} is not positive semidefinite")]
    CovNotPsd(usize),
    #[error("step size too large: {0}")]
    StepTooLarge(String),
    #[error("predictor history is empty")]
    EmptyHistory,
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("LPV gain evaluation failed at theta = {0}")]
    GainEvalFailure(f64),
    #[error("configuration is divergent (rate {0} >= 1)")]
    DivergentConfig(f64),
    #[error("no feasible point on the search grid")]
    NoFeasiblePoint,
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("time stamps decrease on line {0}")]
    NonMonotoneTime(usize),
    #[error("row has {got} data columns, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of a numerical routine rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix
                | Error::SingularInnovation
                | Error::GainEvalFailure(_)
                | Error::DivergentConfig(_)
                | Error::NoFeasiblePoint
                | Error::NoConvergence(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
