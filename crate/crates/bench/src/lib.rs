//! Shared fixtures for the benchmarks.

use std::path::PathBuf;

use cvt_elites::geometry::{sample_uniform, BehaviorSpace, SampleSet};
use cvt_elites::tasks::Maze;

pub fn open_maze() -> Maze {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/open_maze.txt");
    Maze::load(&path).expect("shipped maze loads")
}

/// `count` uniform points in the unit cube of dimension `dims`.
pub fn uniform_points(dims: usize, count: usize, seed: u64) -> SampleSet {
    let space = BehaviorSpace::unit(dims).expect("positive dimension");
    sample_uniform(&space, count, &mut cvt_elites::rng_from_seed(seed)).expect("non-empty")
}
