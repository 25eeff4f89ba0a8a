#![allow(dead_code)]

use fixlab::{generate, Configuration, EvolutionaryGraph, GraphKind, Weighting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Strongly connected digraph on `n` vertices with random weights.
pub fn weighted_digraph(n: usize, seed: u64) -> EvolutionaryGraph {
    generate(
        GraphKind::DirectedErdosRenyi { p: 0.5 },
        n,
        seed,
        Weighting::Random,
    )
    .unwrap()
}

/// Connected undirected unweighted graph.
pub fn undirected(n: usize, p: f64, seed: u64) -> EvolutionaryGraph {
    generate(GraphKind::ErdosRenyi { p }, n, seed, Weighting::Unweighted).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed)
}

pub fn random_vertex(n: usize, seed: u64) -> usize {
    rng(seed).random_range(0..n)
}

/// Two disjoint nonempty configurations.
pub fn disjoint_pair(n: usize, seed: u64) -> (Configuration, Configuration) {
    let mut r = rng(seed);
    loop {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for v in 0..n {
            match r.random_range(0..3) {
                0 => a.push(v),
                1 => b.push(v),
                _ => {}
            }
        }
        if !a.is_empty() && !b.is_empty() {
            return (Configuration::new(a), Configuration::new(b));
        }
    }
}

/// Vertex of least degree, lowest id on ties.
pub fn lowest_degree(g: &EvolutionaryGraph) -> usize {
    (0..g.n()).min_by_key(|&i| (g.out_degree(i), i)).unwrap()
}
