use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inadmissible weight: {0}")]
    InadmissibleWeight(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// The Gram matrix is not numerically positive definite, or its
    /// equilibrated condition number exceeds what double precision supports.
    #[error("ill-conditioned Gram matrix (equilibrated condition number {cond:.3e}); try a smaller degree")]
    Conditioning { cond: f64 },

    #[error("numeric error at {location}: {detail}")]
    Numeric { location: String, detail: String },

    #[error("ill-conditioned sample: root residual {residual:.3e} exceeds {limit:.1e}")]
    IllConditionedSample { residual: f64, limit: f64 },

    #[error("solver quality: {0}")]
    SolverQuality(String),
}

impl Error {
    /// True for errors caused by the caller's parameters rather than by
    /// floating point trouble.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Usage(_) | Error::InadmissibleWeight(_) | Error::Domain(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
