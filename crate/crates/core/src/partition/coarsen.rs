use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

/// Weighted graph used inside the multilevel scheme.
///
/// `vw[u]` is the degree mass of `u` (sum of fine weighted degrees it
/// represents) and `self_w[u]` the collapsed internal weight, counted in both
/// directions. `vw[u] == self_w[u] + Σ ew` over `u`'s adjacency at every level.
#[derive(Clone, Debug)]
pub(crate) struct WGraph {
    pub xadj: Vec<usize>,
    pub adj: Vec<usize>,
    pub ew: Vec<u64>,
    pub vw: Vec<u64>,
    pub self_w: Vec<u64>,
}

impl WGraph {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n();
        WGraph {
            xadj: g.row_ptr().to_vec(),
            adj: g.col_idx().to_vec(),
            ew: g.slot_weights().iter().map(|&w| w as u64).collect(),
            vw: (0..n).map(|u| g.weighted_degree(u)).collect(),
            self_w: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.vw.len()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        (self.xadj[u]..self.xadj[u + 1]).map(move |s| (self.adj[s], self.ew[s]))
    }
}

/// One coarsening step: `map[fine] = coarse`.
pub(crate) struct Level {
    pub graph: WGraph,
    pub map: Vec<usize>,
}

/// Heavy-edge matching. Nodes are visited in random order and each unmatched
/// node pairs with its heaviest unmatched neighbour (lowest id on ties), or
/// stays single.
pub(crate) fn heavy_edge_matching(g: &WGraph, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![usize::MAX; n];
    for &u in &order {
        if mate[u] != usize::MAX {
            continue;
        }
        let mut best: Option<(u64, usize)> = None;
        for (v, w) in g.neighbors(u) {
            if mate[v] != usize::MAX || v == u {
                continue;
            }
            if best.is_none_or(|(bw, bv)| w > bw || (w == bw && v < bv)) {
                best = Some((w, v));
            }
        }
        match best {
            Some((_, v)) => {
                mate[u] = v;
                mate[v] = u;
            }
            None => mate[u] = u,
        }
    }
    mate
}

/// Contracts matched pairs. Coarse ids follow the smaller fine id of each
/// pair, so the result is independent of the visiting order given the match.
pub(crate) fn contract(g: &WGraph, mate: &[usize]) -> Level {
    let n = g.n();
    let mut map = vec![usize::MAX; n];
    let mut nc = 0;
    for u in 0..n {
        if map[u] == usize::MAX {
            map[u] = nc;
            map[mate[u]] = nc;
            nc += 1;
        }
    }
    let mut vw = vec![0u64; nc];
    let mut self_w = vec![0u64; nc];
    for u in 0..n {
        vw[map[u]] += g.vw[u];
        self_w[map[u]] += g.self_w[u];
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for u in 0..n {
        members[map[u]].push(u);
    }
    let mut xadj = Vec::with_capacity(nc + 1);
    xadj.push(0);
    let mut adj = Vec::new();
    let mut ew = Vec::new();
    // Dense scratch row indexed by coarse id, reset after each coarse node.
    let mut acc = vec![0u64; nc];
    let mut touched = Vec::new();
    for (c, fine) in members.iter().enumerate() {
        for &u in fine {
            for (v, w) in g.neighbors(u) {
                let cv = map[v];
                if cv == c {
                    self_w[c] += w;
                    continue;
                }
                if acc[cv] == 0 {
                    touched.push(cv);
                }
                acc[cv] += w;
            }
        }
        touched.sort_unstable();
        for &cv in &touched {
            adj.push(cv);
            ew.push(acc[cv]);
            acc[cv] = 0;
        }
        touched.clear();
        xadj.push(adj.len());
    }
    Level {
        graph: WGraph {
            xadj,
            adj,
            ew,
            vw,
            self_w,
        },
        map,
    }
}

/// Repeated matching until at most `target` nodes remain or a level shrinks
/// the graph by less than `min_reduction`.
///
/// Returns the coarsest graph and, finest first, each finer graph paired with
/// its map to the next level.
pub(crate) fn coarsen(
    g: WGraph,
    target: usize,
    min_reduction: f64,
    rng: &mut ChaCha8Rng,
) -> (WGraph, Vec<(WGraph, Vec<usize>)>) {
    let mut maps = Vec::new();
    let mut cur = g;
    while cur.n() > target {
        let mate = heavy_edge_matching(&cur, rng);
        let level = contract(&cur, &mate);
        let before = cur.n() as f64;
        let after = level.graph.n() as f64;
        if after == before {
            break;
        }
        maps.push((std::mem::replace(&mut cur, level.graph), level.map));
        if (before - after) / before < min_reduction {
            break;
        }
    }
    (cur, maps)
}
