use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("{what}: requested {requested} exceeds the supported limit {limit}")]
    SizeBound {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reference operator is zero")]
    ZeroReference,

    #[error("least-squares system is rank deficient (rank {rank}, required {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("fit residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("regime gate: {0}")]
    RegimeGate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("conditional probabilities inconsistent (deviation {deviation:e})")]
    InconsistentProbabilities { deviation: f64 },

    #[error("permutation Gram matrix is singular for d = {d}, k = {k}")]
    SingularGram { d: usize, k: usize },

    #[error("not a permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn bound(what: &'static str, requested: usize, limit: usize) -> Result<()> {
    if requested > limit {
        Err(Error::SizeBound {
            what,
            requested,
            limit,
        })
    } else {
        Ok(())
    }
}
