use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("matrix is rank deficient ({0})")]
    RankDeficient(String),

    /// Non-finite or non-positive values where a positive finite one is needed.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// Repeated sample points make a nearest-neighbour distance vanish.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// The operation is mathematically inapplicable to this input.
    #[error("refused: {0}")]
    Refused(String),

    /// An internal consistency identity failed.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
