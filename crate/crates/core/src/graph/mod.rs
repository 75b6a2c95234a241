//! Undirected weighted graphs in CSR form with node features and labels.

mod io;
mod lfr;
mod split;
mod svd;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{CsrMatrix, DenseMatrix, Targets};

pub use io::{load_graph, load_splits, save_features, save_graph, save_splits};
pub use lfr::{generate_lfr, LfrParams};
pub use split::SplitMasks;
pub use svd::{svd_features, SvdOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Multilabel,
    Multiclass,
}

/// Node labels.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    /// One class id per node.
    Multiclass {
        classes: Vec<usize>,
        num_classes: usize,
    },
    /// `n × q` matrix of 0/1 values.
    Multilabel(DenseMatrix),
}

impl Labels {
    pub fn multiclass(classes: Vec<usize>) -> Self {
        let num_classes = classes.iter().max().map_or(0, |m| m + 1);
        Labels::Multiclass {
            classes,
            num_classes,
        }
    }

    pub fn multilabel(matrix: DenseMatrix) -> Result<Self> {
        if matrix.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParam(
                "multilabel entries must be 0 or 1".into(),
            ));
        }
        Ok(Labels::Multilabel(matrix))
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Multiclass { classes, .. } => classes.len(),
            Labels::Multilabel(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of output columns: classes or labels.
    pub fn q(&self) -> usize {
        match self {
            Labels::Multiclass { num_classes, .. } => *num_classes,
            Labels::Multilabel(m) => m.cols(),
        }
    }

    pub fn task_kind(&self) -> TaskKind {
        match self {
            Labels::Multiclass { .. } => TaskKind::Multiclass,
            Labels::Multilabel(_) => TaskKind::Multilabel,
        }
    }

    /// Binary indicator of label `j` for `node` (one-hot for multiclass).
    pub fn value(&self, node: usize, j: usize) -> bool {
        match self {
            Labels::Multiclass { classes, .. } => classes[node] == j,
            Labels::Multilabel(m) => m.get(node, j) == 1.0,
        }
    }

    /// Row-major `n × q` indicator matrix.
    pub fn to_binary(&self) -> Vec<bool> {
        let (n, q) = (self.len(), self.q());
        let mut out = Vec::with_capacity(n * q);
        for i in 0..n {
            for j in 0..q {
                out.push(self.value(i, j));
            }
        }
        out
    }

    /// Labels of the given nodes, in order. Multiclass keeps the class count.
    pub fn select(&self, nodes: &[usize]) -> Labels {
        match self {
            Labels::Multiclass {
                classes,
                num_classes,
            } => Labels::Multiclass {
                classes: nodes.iter().map(|&i| classes[i]).collect(),
                num_classes: *num_classes,
            },
            Labels::Multilabel(m) => Labels::Multilabel(m.select_rows(nodes)),
        }
    }

    pub fn targets(&self) -> Targets<'_> {
        match self {
            Labels::Multiclass { classes, .. } => Targets::Classes(classes),
            Labels::Multilabel(m) => Targets::Binary(m),
        }
    }
}

/// Immutable undirected graph; every edge is stored in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weight: Vec<u32>,
    /// Undirected edge id of each directed slot.
    slot_edge: Vec<usize>,
    /// Endpoints `(u, v)` with `u < v`, ordered by `(u, v)`.
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    labels: Labels,
}

impl Graph {
    /// Builds a graph from a possibly asymmetric edge list.
    ///
    /// Self-loops are dropped. When an edge appears more than once (in either
    /// direction) the largest weight wins.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, u32)],
        features: DenseMatrix,
        labels: Labels,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if features.rows() != n {
            return Err(Error::Dimension(format!(
                "{} feature rows for {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} label rows for {n} nodes",
                labels.len()
            )));
        }
        let mut merged: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Dimension(format!(
                    "edge ({u},{v}) out of range for {n} nodes"
                )));
            }
            if w == 0 {
                return Err(Error::InvalidParam(format!("edge ({u},{v}) has weight 0")));
            }
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            let e = merged.entry(key).or_insert(w);
            *e = (*e).max(w);
        }
        Ok(Self::from_sorted_unique(
            n,
            merged.into_iter().collect(),
            features,
            labels,
        ))
    }

    /// `edges` must hold `((u, v), w)` with `u < v`, sorted and unique.
    fn from_sorted_unique(
        n: usize,
        edges: Vec<((usize, usize), u32)>,
        features: DenseMatrix,
        labels: Labels,
    ) -> Self {
        let mut deg = vec![0usize; n];
        for &((u, v), _) in &edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for d in &deg {
            row_ptr.push(row_ptr.last().unwrap() + d);
        }
        let m2 = row_ptr[n];
        let mut col_idx = vec![0usize; m2];
        let mut weight = vec![0u32; m2];
        let mut slot_edge = vec![0usize; m2];
        let mut fill = row_ptr[..n].to_vec();
        // Sorted (u, v) with u < v: reverse slots (v ← u) arrive in increasing
        // u for each v, and forward slots in increasing v for each u. Rows are
        // sorted by placing lower neighbours first.
        for (id, &((u, v), w)) in edges.iter().enumerate() {
            let s = fill[v];
            col_idx[s] = u;
            weight[s] = w;
            slot_edge[s] = id;
            fill[v] += 1;
        }
        for (id, &((u, v), w)) in edges.iter().enumerate() {
            let s = fill[u];
            col_idx[s] = v;
            weight[s] = w;
            slot_edge[s] = id;
            fill[u] += 1;
        }
        Graph {
            row_ptr,
            col_idx,
            weight,
            slot_edge,
            edges: edges.into_iter().map(|(e, _)| e).collect(),
            features,
            labels,
        }
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Weight per directed slot.
    pub fn slot_weights(&self) -> &[u32] {
        &self.weight
    }

    pub fn slot_edge(&self) -> &[usize] {
        &self.slot_edge
    }

    /// Undirected edges `(u, v)`, `u < v`, indexed by edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Weight per undirected edge id.
    pub fn edge_weights(&self) -> Vec<u32> {
        let mut w = vec![0; self.edges.len()];
        for (s, &e) in self.slot_edge.iter().enumerate() {
            w[e] = self.weight[s];
        }
        w
    }

    /// `(neighbour, weight, edge id)` triples of `u`, sorted by neighbour.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, u32, usize)> + '_ {
        (self.row_ptr[u]..self.row_ptr[u + 1])
            .map(move |s| (self.col_idx[s], self.weight[s], self.slot_edge[s]))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_ptr[u + 1] - self.row_ptr[u]
    }

    pub fn weighted_degree(&self, u: usize) -> u64 {
        self.weight[self.row_ptr[u]..self.row_ptr[u + 1]]
            .iter()
            .map(|&w| w as u64)
            .sum()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn task_kind(&self) -> TaskKind {
        self.labels.task_kind()
    }

    pub fn with_features(mut self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.n() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.n()
            )));
        }
        self.features = features;
        Ok(self)
    }

    /// Same topology with new weights, one per undirected edge id.
    pub fn with_edge_weights(&self, weights: &[u32]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if weights.contains(&0) {
            return Err(Error::InvalidParam("edge weights must be ≥ 1".into()));
        }
        let mut g = self.clone();
        for (s, &e) in g.slot_edge.iter().enumerate() {
            g.weight[s] = weights[e];
        }
        Ok(g)
    }

    pub fn same_topology(&self, other: &Graph) -> bool {
        self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Checks symmetry, sortedness, weight positivity and CSR shape.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(Error::Topology(m));
        if self.row_ptr[0] != 0 || self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("row_ptr not monotone".into());
        }
        if self.row_ptr[n] != 2 * self.edges.len() {
            return bad("row_ptr[n] != 2|E|".into());
        }
        for u in 0..n {
            let row = &self.col_idx[self.row_ptr[u]..self.row_ptr[u + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {u} not strictly sorted"));
            }
            for (v, w, _) in self.neighbors(u) {
                if v == u {
                    return bad(format!("self-loop at {u}"));
                }
                if w == 0 {
                    return bad(format!("zero weight on ({u},{v})"));
                }
                if self.weight_between(v, u) != Some(w) {
                    return bad(format!("asymmetric edge ({u},{v})"));
                }
            }
        }
        Ok(())
    }

    pub fn weight_between(&self, u: usize, v: usize) -> Option<u32> {
        let span = self.row_ptr[u]..self.row_ptr[u + 1];
        self.col_idx[span.clone()]
            .binary_search(&v)
            .ok()
            .map(|i| self.weight[span.start + i])
    }

    /// Weighted adjacency `A` as a sparse matrix.
    pub fn adjacency(&self) -> CsrMatrix {
        CsrMatrix::new(
            self.n(),
            self.n(),
            self.row_ptr.clone(),
            self.col_idx.clone(),
            self.weight.iter().map(|&w| w as f64).collect(),
        )
        .expect("graph CSR arrays are well formed")
    }
}

/// A graph extracted from a parent, with the parent id of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub graph: Graph,
    /// `nodes[i]` is the parent id of local node `i`; increasing.
    pub nodes: Vec<usize>,
}

/// Subgraph over the masked nodes, keeping edges with both endpoints inside.
pub fn induced_subgraph(g: &Graph, mask: &[bool]) -> Result<Subgraph> {
    if mask.len() != g.n() {
        return Err(Error::Dimension(format!(
            "mask of length {} for {} nodes",
            mask.len(),
            g.n()
        )));
    }
    let nodes: Vec<usize> = (0..g.n()).filter(|&i| mask[i]).collect();
    induced_by_nodes(g, &nodes)
}

/// Subgraph over a strictly increasing list of node ids.
pub fn induced_by_nodes(g: &Graph, nodes: &[usize]) -> Result<Subgraph> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    if nodes.windows(2).any(|w| w[0] >= w[1]) || *nodes.last().unwrap() >= g.n() {
        return Err(Error::InvalidParam(
            "node list must be increasing and in range".into(),
        ));
    }
    let mut local = vec![usize::MAX; g.n()];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let mut edges = Vec::new();
    for &(u, v) in g.edges() {
        if local[u] != usize::MAX && local[v] != usize::MAX {
            edges.push(((local[u], local[v]), 0));
        }
    }
    // Edge ids follow (u, v) order and relabelling is monotone, so the
    // filtered list stays sorted.
    let weights = g.edge_weights();
    let mut k = 0;
    for (id, &(u, v)) in g.edges().iter().enumerate() {
        if local[u] != usize::MAX && local[v] != usize::MAX {
            edges[k].1 = weights[id];
            k += 1;
        }
    }
    let graph = Graph::from_sorted_unique(
        nodes.len(),
        edges,
        g.features.select_rows(nodes),
        g.labels.select(nodes),
    );
    Ok(Subgraph {
        graph,
        nodes: nodes.to_vec(),
    })
}

/// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃ = diag(rowsum(A + I))`.
pub fn normalize_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.n();
    let dinv: Vec<f64> = (0..n)
        .map(|u| 1.0 / (1.0 + g.weighted_degree(u) as f64).sqrt())
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.col_idx.len() + n);
    let mut values = Vec::with_capacity(g.col_idx.len() + n);
    row_ptr.push(0);
    for u in 0..n {
        let mut diag_done = false;
        for (v, w, _) in g.neighbors(u) {
            if !diag_done && v > u {
                col_idx.push(u);
                values.push(dinv[u] * dinv[u]);
                diag_done = true;
            }
            col_idx.push(v);
            values.push(w as f64 * dinv[u] * dinv[v]);
        }
        if !diag_done {
            col_idx.push(u);
            values.push(dinv[u] * dinv[u]);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::new(n, n, row_ptr, col_idx, values).expect("well-formed normalized adjacency")
}
