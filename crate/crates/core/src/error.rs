use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("mode {mode} out of range for an order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank {rank} out of range (limit {limit}) in mode {mode}")]
    RankOutOfRange { mode: usize, rank: usize, limit: usize },

    #[error("matrix is numerically rank deficient: {0}")]
    RankDeficient(String),

    #[error("core tensor is rank deficient in mode {mode}; the point left the manifold")]
    DegenerateCore { mode: usize },

    #[error("truncation candidate has mode-{mode} rank below the target rank")]
    DegenerateTruncation { mode: usize },

    #[error("tangent vector belongs to a different tangent space")]
    BasisMismatch,

    #[error("non-finite values encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration diverged at step {iteration} (error grew more than tenfold)")]
    Diverged { iteration: usize },

    #[error("dense design would hold {requested} scalars, above the cap of {cap}")]
    MemoryCap { requested: usize, cap: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        match self {
            e @ (Error::AtIteration { .. } | Error::NonFinite { .. } | Error::Diverged { .. }) => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }
}
