use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-orthogonal generator {index} (deviation {deviation:.3e})")]
    NonOrthogonal { index: usize, deviation: f64 },

    #[error("weight-incompatible action: generator {index} mixes coordinates of different weight")]
    WeightIncompatible { index: usize },

    #[error("group closure exceeds cap of {cap} elements")]
    GroupTooLarge { cap: usize },

    #[error("source/target pairing is not a homomorphism")]
    NotHomomorphism,

    #[error("sigma is not invariant under the group action")]
    SigmaNotInvariant,

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("rank deficient matrix (smallest singular value {smallest_singular:.3e})")]
    RankDeficient { smallest_singular: f64 },

    #[error("degenerate Gram matrix at {point:?}")]
    DegenerateGram { point: Vec<f64> },

    #[error("neighborhood too large: |theta| = {norm:.6}")]
    NeighborhoodTooLarge { norm: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
