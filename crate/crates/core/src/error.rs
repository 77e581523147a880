use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("partition enumeration bounded to k <= {max}, got k = {k}")]
    EnumerationBound { k: usize, max: usize },

    #[error("index {index} out of range for ground set of size {k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("quadrature failed to converge (error estimate {err_est:e})")]
    QuadratureFailure { err_est: f64 },

    #[error("observation component {component} outside GEV support")]
    OutOfSupport { component: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("sampler exceeded budget of {budget} extremal functions at site {site}")]
    SamplerBudget { site: usize, budget: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("missing partitions for Stephenson-Tawn likelihood")]
    MissingPartitions,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
