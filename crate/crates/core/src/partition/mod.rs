//! Multilevel weighted partitioning into `k` possibly imbalanced clusters.
//!
//! The pipeline coarsens by heavy-edge matching, clusters the coarsest graph
//! greedily from weight-proportional seeds, and refines each level on the way
//! back up by boundary moves that raise the normalized association
//! `Σ_c links(c, c) / degree(c)`.

mod coarsen;
mod refine;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{induced_by_nodes, Graph, Subgraph};
use crate::seed;

use coarsen::{coarsen, WGraph};
use refine::{base_clustering, normalized_association, refine, repair_empty};

/// Tunables for [`partition_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionOptions {
    /// Coarsening stops at `max(coarsen_factor · k, 2k)` nodes.
    pub coarsen_factor: usize,
    /// A level that removes fewer than this fraction of nodes ends coarsening.
    pub min_reduction: f64,
    pub refine_sweeps: usize,
    /// Independent seedings of the base clustering; the best is kept.
    pub base_trials: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            coarsen_factor: 30,
            min_reduction: 0.05,
            refine_sweeps: 10,
            base_trials: 4,
        }
    }
}

/// Node-to-cluster assignment with its cut edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterConfig {
    pub k: usize,
    pub assign: Vec<usize>,
    /// Undirected edge ids of `g` whose endpoints lie in different clusters.
    pub cut_edges: Vec<usize>,
}

impl ClusterConfig {
    /// Validates `assign` against `g` and derives the cut edges.
    pub fn new(g: &Graph, k: usize, assign: Vec<usize>) -> Result<Self> {
        if assign.len() != g.n() {
            return Err(Error::Dimension(format!(
                "{} assignments for {} nodes",
                assign.len(),
                g.n()
            )));
        }
        if let Some(&c) = assign.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidParam(format!(
                "cluster id {c} outside 0..{k}"
            )));
        }
        let cut_edges = g
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, &(u, v))| assign[u] != assign[v])
            .map(|(id, _)| id)
            .collect();
        Ok(ClusterConfig {
            k,
            assign,
            cut_edges,
        })
    }

    /// Node lists per cluster, each increasing.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (u, &c) in self.assign.iter().enumerate() {
            m[c].push(u);
        }
        m
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.assign.iter().for_each(|&c| s[c] += 1);
        s
    }

    /// Total weight of cut edges under the weights of `g`.
    pub fn cut_weight(&self, g: &Graph) -> u64 {
        let w = g.edge_weights();
        self.cut_edges.iter().map(|&e| w[e] as u64).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (u, c) in self.assign.iter().enumerate() {
            writeln!(out, "{u}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `node<TAB>cluster` lines; `k` is one more than the largest id.
    pub fn load(path: &Path, g: &Graph) -> Result<Self> {
        let name = path.display().to_string();
        let reader = BufReader::new(File::open(path)?);
        let mut assign = vec![usize::MAX; g.n()];
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(&name, i + 1, "expected node<TAB>cluster"));
            };
            let node: usize = a
                .parse()
                .map_err(|_| Error::parse(&name, i + 1, format!("bad node id {a:?}")))?;
            let c: usize = b
                .parse()
                .map_err(|_| Error::parse(&name, i + 1, format!("bad cluster id {b:?}")))?;
            if node >= g.n() || assign[node] != usize::MAX {
                return Err(Error::parse(
                    &name,
                    i + 1,
                    format!("node {node} out of range or repeated"),
                ));
            }
            assign[node] = c;
        }
        if let Some(u) = assign.iter().position(|&c| c == usize::MAX) {
            return Err(Error::parse(&name, 0, format!("node {u} has no cluster")));
        }
        let k = assign.iter().max().map_or(0, |&c| c + 1);
        ClusterConfig::new(g, k, assign)
    }
}

pub fn partition(g: &Graph, k: usize, seed: u64) -> Result<ClusterConfig> {
    partition_with(g, k, seed, &PartitionOptions::default())
}

/// Splits `g` into exactly `k` nonempty clusters using its current weights.
pub fn partition_with(
    g: &Graph,
    k: usize,
    seed: u64,
    opts: &PartitionOptions,
) -> Result<ClusterConfig> {
    if k == 0 || k > g.n() {
        return Err(Error::InvalidParam(format!(
            "k = {k} needs 1 ≤ k ≤ n = {}",
            g.n()
        )));
    }
    if opts.refine_sweeps == 0 || opts.base_trials == 0 {
        return Err(Error::InvalidParam(
            "refine_sweeps and base_trials must be ≥ 1".into(),
        ));
    }
    if k == 1 {
        return ClusterConfig::new(g, 1, vec![0; g.n()]);
    }
    let mut rng = seed::rng(seed);
    let fine = WGraph::from_graph(g);
    let target = (opts.coarsen_factor * k).max(2 * k);
    let (coarsest, levels) = coarsen(fine, target, opts.min_reduction, &mut rng);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..opts.base_trials {
        let mut a = base_clustering(&coarsest, k, &mut rng);
        refine(&coarsest, &mut a, k, opts.refine_sweeps);
        let score = normalized_association(&coarsest, &a, k);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, a));
        }
    }
    let mut assign = best.expect("at least one trial").1;

    for (graph, map) in levels.iter().rev() {
        assign = map.iter().map(|&c| assign[c]).collect();
        refine(graph, &mut assign, k, opts.refine_sweeps);
    }
    let finest = levels.first().map_or(&coarsest, |(graph, _)| graph);
    if repair_empty(finest, &mut assign, k) > 0 {
        refine(finest, &mut assign, k, opts.refine_sweeps);
    }
    ClusterConfig::new(g, k, assign)
}

/// Returns `reweighted` with every edge weight reset to its value in
/// `original`. Cut edges are restored too, so the result carries exactly the
/// original weights.
pub fn restore_weights(reweighted: &Graph, original: &Graph, cfg: &ClusterConfig) -> Result<Graph> {
    if !reweighted.same_topology(original) {
        return Err(Error::Topology(
            "reweighted graph differs from original".into(),
        ));
    }
    if cfg.assign.len() != original.n() {
        return Err(Error::Dimension(
            "cluster config does not match graph".into(),
        ));
    }
    reweighted.with_edge_weights(&original.edge_weights())
}

/// One subgraph per cluster holding its nodes and the non-cut edges among them.
pub fn cluster_subgraphs(g: &Graph, cfg: &ClusterConfig) -> Result<Vec<Subgraph>> {
    cfg.members()
        .iter()
        .map(|nodes| induced_by_nodes(g, nodes))
        .collect()
}

/// Union of the given clusters, including edges between them.
pub fn merge_clusters(g: &Graph, cfg: &ClusterConfig, clusters: &[usize]) -> Result<Subgraph> {
    let mut keep = vec![false; cfg.k];
    for &c in clusters {
        if c >= cfg.k {
            return Err(Error::InvalidParam(format!(
                "cluster {c} outside 0..{}",
                cfg.k
            )));
        }
        keep[c] = true;
    }
    let nodes: Vec<usize> = (0..g.n()).filter(|&u| keep[cfg.assign[u]]).collect();
    induced_by_nodes(g, &nodes)
}

/// Samples `bsize` distinct clusters uniformly and merges them.
pub fn sample_batch(
    g: &Graph,
    cfg: &ClusterConfig,
    bsize: usize,
    rng: &mut impl Rng,
) -> Result<Subgraph> {
    if bsize == 0 || bsize > cfg.k {
        return Err(Error::InvalidParam(format!(
            "bsize = {bsize} needs 1 ≤ bsize ≤ k = {}",
            cfg.k
        )));
    }
    let picked = index::sample(rng, cfg.k, bsize).into_vec();
    merge_clusters(g, cfg, &picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{bare, random_graph};

    #[test]
    fn disjoint_triangles() {
        let g = bare(
            6,
            &[
                (0, 1, 1),
                (1, 2, 1),
                (0, 2, 1),
                (3, 4, 1),
                (4, 5, 1),
                (3, 5, 1),
            ],
        );
        let cfg = partition(&g, 2, 0).unwrap();
        assert!(cfg.cut_edges.is_empty());
        assert_eq!(cfg.sizes(), vec![3, 3]);
    }

    #[test]
    fn path_keeps_heavy_edge() {
        let g = bare(4, &[(0, 1, 1), (1, 2, 100), (2, 3, 1)]);
        for s in 0..10 {
            let cfg = partition(&g, 2, s).unwrap();
            assert_eq!(cfg.assign[1], cfg.assign[2]);
        }
    }

    #[test]
    fn exactly_k_nonempty_clusters() {
        let g = random_graph(80, 0.05, 6);
        for k in [1, 2, 7, 40, 80] {
            let cfg = partition(&g, k, 3).unwrap();
            assert!(cfg.sizes().iter().all(|&s| s > 0), "k = {k}");
        }
        assert!(partition(&g, 0, 0).is_err());
        assert!(partition(&g, 81, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = random_graph(300, 0.02, 2);
        assert_eq!(partition(&g, 8, 5).unwrap(), partition(&g, 8, 5).unwrap());
    }

    #[test]
    fn restore_gives_original_weights() {
        let g = random_graph(20, 0.2, 1);
        let re = g.with_edge_weights(&vec![8; g.num_edges()]).unwrap();
        let cfg = partition(&re, 3, 0).unwrap();
        assert_eq!(restore_weights(&re, &g, &cfg).unwrap(), g);
        let other = bare(20, &[(0, 1, 1)]);
        assert!(restore_weights(&other, &g, &cfg).is_err());
    }

    #[test]
    fn full_batch_is_whole_graph() {
        let g = random_graph(40, 0.1, 3);
        let cfg = partition(&g, 4, 1).unwrap();
        let all = sample_batch(&g, &cfg, 4, &mut seed::rng(0)).unwrap();
        assert_eq!(all.graph, g);
        assert!(sample_batch(&g, &cfg, 5, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let g = random_graph(30, 0.1, 3);
        let cfg = partition(&g, 3, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.tsv");
        cfg.save(&p).unwrap();
        assert_eq!(ClusterConfig::load(&p, &g).unwrap(), cfg);
    }
}
