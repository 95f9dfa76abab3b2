//! Error type shared by every module in the crate.
//!
//! Messages deliberately avoid commas so they can be embedded verbatim in a
//! CSV status column.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs} vs {rhs}")]
    DimensionMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    #[error("non-finite entry at ({row} {col}) produced by {op}")]
    NonFinite {
        op: &'static str,
        row: usize,
        col: usize,
    },

    #[error("{what} did not converge within {limit} iterations/sweeps")]
    NoConvergence { what: &'static str, limit: usize },

    /// An intermediate QR factor lost a column; the iterate block no longer
    /// spans k directions.
    #[error("rank collapse at column {index} (|r| = {value:e}); try a different seed")]
    RankCollapse { index: usize, value: f64 },

    #[error("singular sketch block: sigma_min(G'1) = {value:e}")]
    SingularBlock { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
