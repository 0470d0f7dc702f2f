//! Quality-diversity optimization with grid-based MAP-Elites and CVT-MAP-Elites.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: Minkowski distances, Monte Carlo centroidal Voronoi
//!   tessellations and a nearest-centroid index.
//! - [`archive`]: grid- and centroid-indexed elite archives.
//! - [`evolve`]: the select/mutate/evaluate/insert loop.
//! - [`tasks`]: the maze-navigation robot, trajectory descriptors, a
//!   constrained trajectory sampler for building centroids and a synthetic
//!   landscape for quick experiments.
//! - [`metrics`]: coverage, spread, expected best performance and CDF/CCDF
//!   tables computed over evaluation scenarios.

pub mod archive;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod metrics;
pub mod tasks;

pub use archive::{Archive, Direction, Elite, GridSpec, Indexer, InsertOutcome};
pub use error::{Error, Result};
pub use evolve::{DiscreteGenotypeSpec, Evaluation, EvolutionConfig, RunRecord, Task};
pub use geometry::{BehaviorSpace, CentroidIndex, Centroids, NormSpec, SampleSet};

/// Random stream used everywhere a seed is accepted.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Creates the crate's random stream from a seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
