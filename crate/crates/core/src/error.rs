use std::path::PathBuf;

/// Errors raised by the knot computations, estimators and test statistics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite integrand value at t = {at}")]
    NonFiniteIntegrand { at: f64 },

    #[error("degenerate bracket [{lo}, {hi}]")]
    DegenerateBracket { lo: f64, hi: f64 },

    #[error("optimizer did not converge after {iterations} iterations")]
    Unconverged { iterations: usize },

    #[error("degenerate process: |Z| is constant, the maximizer is not unique")]
    DegenerateProcess,

    #[error("regression is near-singular: 1 - rho = {one_minus_rho:e}")]
    NearSingular { one_minus_rho: f64 },

    #[error("the first knot is not a strict local maximum (-X'' not positive definite)")]
    NotAMaximum,

    #[error("correlation matrix has numerical rank {found}, expected {expected}")]
    RankDeficient { expected: usize, found: usize },

    #[error("non-positive denominator {0:e} in test statistic")]
    NonPositiveDenominator(f64),

    #[error("statistic {name} = {value} lies outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("observation schema error: {0}")]
    Schema(String),

    #[error("knot index {index} out of range (path has {len} knots)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
