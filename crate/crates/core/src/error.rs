use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error(
        "brute force limited to min(n1, n2) <= {max_small} and at most {max_injections} injections, got {n1} x {n2}"
    )]
    BruteForceGuard {
        n1: usize,
        n2: usize,
        max_small: usize,
        max_injections: u64,
    },

    #[error("sorted 1-d matching needs dim = 1 and equal cardinalities, got dim {dim}, {n1} x {n2}")]
    NotSortable { dim: usize, n1: usize, n2: usize },

    #[error("subdivision depth {depth} in dimension {dim} exceeds the guard depth * dim <= {max}")]
    DepthGuard { depth: u32, dim: usize, max: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
