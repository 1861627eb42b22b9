use thiserror::Error;

/// Errors raised by the Laguerre-domain toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("basis matrix is rank deficient (Gram condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("non-finite value produced while {0}")]
    NonFinite(&'static str),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("unstable filter: pole magnitude {0:.6} is not inside the unit circle")]
    UnstableFilter(f64),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NonFinite(_) => "non_finite",
            Error::Singular(_) => "singular",
            Error::NotPositiveSemidefinite { .. } => "not_psd",
            Error::UnstableFilter(_) => "unstable_filter",
            Error::Degenerate(_) => "degenerate",
            Error::Trial { .. } => "trial",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        })
    }
}
