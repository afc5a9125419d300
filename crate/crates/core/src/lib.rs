//! Euclidean minimum bipartite matching between uniform random point clouds.

pub mod decimation;
pub mod error;
pub mod exact;
pub mod geometric;
mod kdtree;
pub mod lab;
pub mod lap;
pub mod points;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exact::{brute_force, solve_exact, sorted_match_1d, Matching};
pub use points::{sample_cloud, sample_pair, Cardinality, PointCloud, SampleSpec};
