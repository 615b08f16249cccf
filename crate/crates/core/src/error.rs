use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants map onto the distinct failure kinds the
/// pipeline can surface, so callers can branch on them (and the CLI can map
/// them to exit codes).
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("unsupported format version '{found}' (expected {expected})")]
    VersionMismatch { found: String, expected: &'static str },

    #[error("shape chain violation at layer {layer}: {detail}")]
    ShapeChain { layer: usize, detail: String },

    #[error("invalid group id {group} (partition has {n_groups} groups)")]
    InvalidGroup { group: usize, n_groups: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
