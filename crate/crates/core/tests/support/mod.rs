#![allow(dead_code)]

pub mod grad;

use clusterpolicy::graph::{Graph, Labels};
use clusterpolicy::nn::DenseMatrix;
use clusterpolicy::seed;
use rand::Rng;

pub fn build(n: usize, edges: &[(usize, usize, u32)]) -> Graph {
    Graph::from_edges(
        n,
        edges,
        DenseMatrix::zeros(n, 0),
        Labels::multiclass(vec![0; n]),
    )
    .unwrap()
}

/// Minimum cut weight over all 2-partitions with both sides nonempty.
pub fn brute_min_cut(g: &Graph) -> u64 {
    let n = g.n();
    let w = g.edge_weights();
    (1u32..(1 << (n - 1)))
        .map(|mask| {
            g.edges()
                .iter()
                .zip(&w)
                .filter(|(&(u, v), _)| (mask >> u & 1) != (mask >> v & 1))
                .map(|(_, &x)| x as u64)
                .sum()
        })
        .min()
        .unwrap()
}

/// `G(n, p)` with weights `2^i`, `i` uniform in `0..4`.
pub fn random_weighted(n: usize, p: f64, seed_: u64) -> Graph {
    let mut rng = seed::rng(seed_);
    let mut e = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                e.push((u, v, 1u32 << rng.gen_range(0..4)));
            }
        }
    }
    build(n, &e)
}

/// The fixed family of small graphs used for the exhaustive comparisons:
/// `n` uniform in 4..=10, edge probability 0.4, edgeless draws skipped.
pub fn small_graph_family(count: usize) -> Vec<Graph> {
    let mut rng = seed::rng(2024);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(4..=10);
        let g = random_weighted(n, 0.4, rng.gen());
        if g.num_edges() > 0 {
            out.push(g);
        }
    }
    out
}
