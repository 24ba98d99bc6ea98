//! Error types shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid, unrepairable, or degenerate geometry, named by unit/district id.
    #[error("geometry error for `{id}`: {reason}")]
    Geometry { id: String, reason: String },

    /// The region as a whole cannot be processed (all units excluded, fewer
    /// than two districts, ...).
    #[error("region error: {0}")]
    Region(String),

    /// The region-wide entropy is zero, so the entropy index is undefined.
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed or incomplete input files.
    #[error("ingestion error in {file}: {reason}")]
    Ingest { file: String, reason: String },

    /// A chain rejected too many consecutive proposals to make progress.
    #[error(
        "stuck chain {chain_id}: {consecutive_rejects} consecutive rejections \
         ({rejected_lower_bound} lower-bound failures, {rejected_std} std failures over the run)"
    )]
    StuckChain {
        chain_id: u32,
        consecutive_rejects: u64,
        rejected_lower_bound: u64,
        rejected_std: u64,
    },

    /// A variance-based statistic was requested on constant data.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// Bad configuration file or parameter values.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn geometry(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Geometry {
            id: id.into(),
            reason: reason.into(),
        }
    }

    pub fn ingest(file: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Ingest {
            file: file.into(),
            reason: reason.into(),
        }
    }
}
