use std::path::PathBuf;

/// Errors produced by the quality-diversity library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid behavior space: {0}")]
    InvalidSpace(String),

    #[error("invalid norm order {0}: must be a finite positive real")]
    InvalidNorm(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{k} centroids requested but only {samples} samples available")]
    TooFewSamples { k: usize, samples: usize },

    #[error("sample set has fewer than {k} distinct points")]
    DegenerateSamples { k: usize },

    #[error(
        "grid of {cells} cells exceeds the archive limit of {limit} cells \
         ({memory} of RAM needed just for the cell index)"
    )]
    GridCapacity {
        /// Exact cell count as text; it may not fit in any integer type.
        cells: String,
        limit: u64,
        memory: String,
        memory_bytes: f64,
    },

    #[error("archive is empty")]
    EmptyArchive,

    #[error("archive holds {0} elites, at least 2 are required")]
    TooFewElites(usize),

    #[error("niche {niche} is out of range for an archive of capacity {capacity}")]
    NicheOutOfRange { niche: u64, capacity: u64 },

    #[error("evaluation budget {budget} is smaller than the initial batch of {initial}")]
    BudgetTooSmall { budget: usize, initial: usize },

    #[error("constrained trajectory sampling failed after {0} attempts")]
    SamplingExhausted(usize),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
