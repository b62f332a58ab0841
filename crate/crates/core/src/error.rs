use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero matrix has no reduced SVD")]
    ZeroMatrix,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("SVD did not converge")]
    NoConvergence,

    #[error("rank {rank} outside 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("tail index alpha = {0} outside (1, 2]")]
    InvalidAlpha(f64),

    #[error("theory bounds require K >= 3, got {0}")]
    HorizonTooShort(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed matrix container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
