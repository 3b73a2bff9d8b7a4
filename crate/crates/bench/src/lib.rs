//! Shared fixtures for the benchmarks.

use conjdense::measure::{CellSet, GridMap, GridSpace};
use conjdense::rng;

pub fn space(log2: u32) -> GridSpace {
    GridSpace::with_log2(log2).expect("valid benchmark resolution")
}

pub fn random_map(log2: u32, seed: u64) -> GridMap {
    GridMap::random(space(log2), &mut rng::stream(seed, 0))
}

/// A uniformly drawn set of half measure.
pub fn half_set(log2: u32, seed: u64) -> CellSet {
    let n = 1usize << log2;
    CellSet::new(space(log2), rng::subset(&mut rng::stream(seed, 1), n, n / 2)).expect("sorted subset")
}
