use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("matrix is not a valid binary computing matrix: {0}")]
    InvalidMatrix(String),

    #[error("cover failed verification: {0}")]
    InvalidCover(String),

    #[error("cover is not uniform; operation requires identity submatrices of a single size")]
    NonUniformCover,

    #[error("matrix is not {expected}-shaped: {reason}")]
    NotConstructionShaped {
        expected: &'static str,
        reason: String,
    },

    #[error("design is not a valid (v,k,1)-BIBD: {0}")]
    InvalidDesign(String),

    #[error("unsupported construction: {0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cover search infeasible: {0}")]
    Infeasible(String),

    #[error("no identity submatrix cover of size {g} exists (exhaustive search)")]
    NoCoverExists { g: usize },

    #[error("cover search budget exhausted after {0}")]
    BudgetExhausted(String),

    #[error("load balancing unavailable: {0}")]
    BalanceUnavailable(String),

    #[error("perfect matching precondition failed: {0}")]
    MatchingPrecondition(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("invalid sender plan: {0}")]
    InvalidPlan(String),

    #[error("server {server} lacks mapped IVA (q={q}, f={f})")]
    MissingIva { server: String, q: usize, f: String },

    #[error("too many stragglers: {stragglers} exceed the g-2 = {limit} tolerance")]
    TooManyStragglers { stragglers: usize, limit: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
