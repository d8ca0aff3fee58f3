use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Mesh, region or normaliser that cannot describe a valid experiment.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numeric argument outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A geometric query that leaves the sampled region, or empty input.
    #[error("domain error: {0}")]
    Domain(String),
    /// Too few usable points for a regression or tail fit.
    #[error("fit error: {0}")]
    Fit(String),
    /// Malformed persisted data.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        // negated so that NaN operands fail the check
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let failed = !($cond);
        if failed {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
