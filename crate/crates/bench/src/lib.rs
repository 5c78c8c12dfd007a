//! Fixtures shared by the criterion benches.

use sparse_game_core::graph::{build_chain, build_lattice};
use sparse_game_core::lq::LqGameSpec;
use sparse_game_core::{Graph, Orientation, Result};

/// The cyclic chain benchmark game with `n` players and `μ = 0.3`.
pub fn chain_game(n: usize) -> Result<LqGameSpec> {
    LqGameSpec::chain_benchmark(n, 0.3)
}

/// Undirected and outward lattices of the given radius.
pub fn lattices(radius: u32) -> Result<(Graph, Graph)> {
    Ok((
        build_lattice(radius, Orientation::Undirected)?,
        build_lattice(radius, Orientation::Outward)?,
    ))
}

pub fn cycle(n: usize) -> Result<Graph> {
    build_chain(n, true)
}
