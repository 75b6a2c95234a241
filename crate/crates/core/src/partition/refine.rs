use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::coarsen::WGraph;

fn ratio(links: u64, mass: u64) -> f64 {
    if mass == 0 {
        0.0
    } else {
        links as f64 / mass as f64
    }
}

/// Per-cluster internal links (both directions, plus collapsed weight) and
/// degree mass.
pub(crate) struct ClusterTotals {
    pub links: Vec<u64>,
    pub mass: Vec<u64>,
    pub count: Vec<usize>,
}

impl ClusterTotals {
    pub fn compute(g: &WGraph, assign: &[usize], k: usize) -> Self {
        let mut t = ClusterTotals {
            links: vec![0; k],
            mass: vec![0; k],
            count: vec![0; k],
        };
        for u in 0..g.n() {
            let c = assign[u];
            t.mass[c] += g.vw[u];
            t.links[c] += g.self_w[u];
            t.count[c] += 1;
            for (v, w) in g.neighbors(u) {
                if assign[v] == c {
                    t.links[c] += w;
                }
            }
        }
        t
    }

    /// Normalized association `Σ_c links(c) / mass(c)`.
    pub fn objective(&self) -> f64 {
        self.links
            .iter()
            .zip(&self.mass)
            .map(|(&l, &m)| ratio(l, m))
            .sum()
    }
}

pub(crate) fn normalized_association(g: &WGraph, assign: &[usize], k: usize) -> f64 {
    ClusterTotals::compute(g, assign, k).objective()
}

/// Picks `k` distinct seeds with probability proportional to `vw + 1`, then
/// grows clusters greedily: the unassigned node with the strongest tie to any
/// cluster joins the cluster it is most connected to. Nodes unreachable from
/// every seed start on the lightest cluster.
pub(crate) fn base_clustering(g: &WGraph, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = g.n();
    debug_assert!(k >= 1 && k <= n);
    let mut assign = vec![usize::MAX; n];
    let mut mass = vec![0u64; k];
    let mut weights: Vec<u64> = g.vw.iter().map(|&w| w + 1).collect();
    for (c, m) in mass.iter_mut().enumerate() {
        let total: u64 = weights.iter().sum();
        let mut pick = rng.gen_range(0..total);
        let mut seed = 0;
        for (u, &w) in weights.iter().enumerate() {
            if pick < w {
                seed = u;
                break;
            }
            pick -= w;
        }
        assign[seed] = c;
        weights[seed] = 0;
        *m += g.vw[seed];
    }

    // conn[u * k + c] = weight from unassigned u into cluster c.
    let mut conn = vec![0u64; n * k];
    let mut heap: BinaryHeap<(u64, Reverse<usize>)> = BinaryHeap::new();
    let mut best_conn = vec![0u64; n];
    let touch = |u: usize,
                 assign: &[usize],
                 conn: &mut [u64],
                 best_conn: &mut [u64],
                 heap: &mut BinaryHeap<(u64, Reverse<usize>)>| {
        for (v, w) in g.neighbors(u) {
            if assign[v] != usize::MAX {
                continue;
            }
            conn[v * k + assign[u]] += w;
            let best = *conn[v * k..(v + 1) * k].iter().max().unwrap();
            if best > best_conn[v] {
                best_conn[v] = best;
                heap.push((best, Reverse(v)));
            }
        }
    };
    for u in 0..n {
        if assign[u] != usize::MAX {
            touch(u, &assign, &mut conn, &mut best_conn, &mut heap);
        }
    }
    let mut remaining = n - k;
    let mut next_orphan = 0;
    while remaining > 0 {
        let u = loop {
            match heap.pop() {
                Some((w, Reverse(u))) if assign[u] == usize::MAX && w == best_conn[u] => {
                    break Some(u)
                }
                Some(_) => continue,
                None => break None,
            }
        };
        let (u, c) = match u {
            Some(u) => {
                let row = &conn[u * k..(u + 1) * k];
                let best = *row.iter().max().unwrap();
                (u, row.iter().position(|&x| x == best).unwrap())
            }
            None => {
                while assign[next_orphan] != usize::MAX {
                    next_orphan += 1;
                }
                let light = (0..k).min_by_key(|&c| (mass[c], c)).unwrap();
                (next_orphan, light)
            }
        };
        assign[u] = c;
        mass[c] += g.vw[u];
        remaining -= 1;
        touch(u, &assign, &mut conn, &mut best_conn, &mut heap);
    }
    assign
}

/// Boundary refinement by normalized-association gain.
///
/// Each sweep visits nodes in index order and moves a node to the neighbouring
/// cluster with the largest strictly positive gain (lowest cluster id on
/// ties). A move never empties a cluster. Returns the number of sweeps run.
pub(crate) fn refine(g: &WGraph, assign: &mut [usize], k: usize, max_sweeps: usize) -> usize {
    let mut t = ClusterTotals::compute(g, assign, k);
    let mut into = vec![0u64; k];
    let mut seen: Vec<usize> = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let before = t.objective();
        let mut moved = false;
        for u in 0..g.n() {
            let a = assign[u];
            if t.count[a] == 1 {
                continue;
            }
            for (v, w) in g.neighbors(u) {
                let c = assign[v];
                if into[c] == 0 {
                    seen.push(c);
                }
                into[c] += w;
            }
            let boundary = seen.iter().any(|&c| c != a);
            if boundary {
                let (d, s) = (g.vw[u], g.self_w[u]);
                let la = t.links[a] - 2 * into[a] - s;
                let ma = t.mass[a] - d;
                let base_a = ratio(t.links[a], t.mass[a]);
                let mut best: Option<(f64, usize)> = None;
                for &b in &seen {
                    if b == a {
                        continue;
                    }
                    let lb = t.links[b] + 2 * into[b] + s;
                    let mb = t.mass[b] + d;
                    let gain =
                        ratio(la, ma) + ratio(lb, mb) - base_a - ratio(t.links[b], t.mass[b]);
                    if gain > 1e-12
                        && best.is_none_or(|(bg, bc)| gain > bg || (gain == bg && b < bc))
                    {
                        best = Some((gain, b));
                    }
                }
                if let Some((_, b)) = best {
                    t.links[a] = la;
                    t.mass[a] = ma;
                    t.count[a] -= 1;
                    t.links[b] += 2 * into[b] + s;
                    t.mass[b] += d;
                    t.count[b] += 1;
                    assign[u] = b;
                    moved = true;
                }
            }
            for &c in &seen {
                into[c] = 0;
            }
            seen.clear();
        }
        let after = t.objective();
        assert!(
            after >= before - 1e-9,
            "refinement decreased the objective: {before} -> {after}"
        );
        if !moved {
            break;
        }
    }
    sweeps
}

/// Fills empty clusters by detaching a node from the largest cluster at its
/// weakest internal edge.
pub(crate) fn repair_empty(g: &WGraph, assign: &mut [usize], k: usize) -> usize {
    let mut repaired = 0;
    loop {
        let mut count = vec![0usize; k];
        assign.iter().for_each(|&c| count[c] += 1);
        let Some(empty) = (0..k).find(|&c| count[c] == 0) else {
            return repaired;
        };
        let largest = (0..k).max_by_key(|&c| (count[c], Reverse(c))).unwrap();
        let mut weakest: Option<(u64, usize, usize)> = None;
        for u in 0..g.n() {
            if assign[u] != largest {
                continue;
            }
            for (v, w) in g.neighbors(u) {
                if u < v && assign[v] == largest && weakest.is_none_or(|b| (w, u, v) < b) {
                    weakest = Some((w, u, v));
                }
            }
        }
        let mover = match weakest {
            Some((_, _, v)) => v,
            None => (0..g.n()).rev().find(|&u| assign[u] == largest).unwrap(),
        };
        assign[mover] = empty;
        repaired += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{bare, random_graph};
    use crate::seed;

    #[test]
    fn base_clustering_covers_all_clusters() {
        let g = WGraph::from_graph(&random_graph(60, 0.08, 9));
        for k in [1, 2, 5, 60] {
            let a = base_clustering(&g, k, &mut seed::rng(2));
            let mut hit = vec![false; k];
            a.iter().for_each(|&c| hit[c] = true);
            assert!(hit.iter().all(|&h| h), "k = {k}");
        }
    }

    #[test]
    fn refinement_never_empties_a_cluster() {
        let g = WGraph::from_graph(&random_graph(50, 0.1, 1));
        let mut a: Vec<usize> = (0..50).map(|u| u % 4).collect();
        let before = normalized_association(&g, &a, 4);
        refine(&g, &mut a, 4, 10);
        assert!(normalized_association(&g, &a, 4) >= before);
        for c in 0..4 {
            assert!(a.contains(&c));
        }
    }

    #[test]
    fn repair_splits_largest_at_weakest_edge() {
        let g = WGraph::from_graph(&bare(4, &[(0, 1, 5), (1, 2, 1), (2, 3, 5)]));
        let mut a = vec![0, 0, 0, 0];
        assert_eq!(repair_empty(&g, &mut a, 2), 1);
        assert_eq!(a, vec![0, 0, 1, 0]);
    }
}
