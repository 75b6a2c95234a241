use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::DenseMatrix;
use crate::par;

/// Rolling per-edge history of the last `m` actions and edge scores.
///
/// Row `e` holds the oldest entry first. Before any step the weight slots
/// hold 1 and the reward slots 0; afterwards actions are stored as
/// `index / p`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeHistory {
    m: usize,
    p: usize,
    weights: Vec<f64>,
    rewards: Vec<f64>,
}

impl EdgeHistory {
    pub fn new(num_edges: usize, m: usize, p: usize) -> Self {
        EdgeHistory {
            m,
            p,
            weights: vec![1.0; num_edges * m],
            rewards: vec![0.0; num_edges * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_edges(&self) -> usize {
        self.weights.len().checked_div(self.m).unwrap_or(0)
    }

    pub fn weights(&self, e: usize) -> &[f64] {
        &self.weights[e * self.m..(e + 1) * self.m]
    }

    pub fn rewards(&self, e: usize) -> &[f64] {
        &self.rewards[e * self.m..(e + 1) * self.m]
    }

    /// Appends one step, dropping the oldest entry of every edge.
    pub fn push(&mut self, actions: &[usize], scores: &[f64]) -> Result<()> {
        let e = actions.len();
        if scores.len() != e || (self.m > 0 && e != self.num_edges()) {
            return Err(Error::Dimension(format!(
                "{} actions and {} scores for {} edges",
                e,
                scores.len(),
                self.num_edges()
            )));
        }
        if self.m == 0 {
            return Ok(());
        }
        let (m, p) = (self.m, self.p.max(1) as f64);
        for i in 0..e {
            let w = &mut self.weights[i * m..(i + 1) * m];
            w.rotate_left(1);
            w[m - 1] = actions[i] as f64 / p;
            let r = &mut self.rewards[i * m..(i + 1) * m];
            r.rotate_left(1);
            r[m - 1] = scores[i];
        }
        Ok(())
    }
}

/// Width of an edge state: `2f + 4d + 2m`.
pub fn state_dim(f: usize, d: usize, m: usize) -> usize {
    2 * f + 4 * d + 2 * m
}

/// Sum of neighbour embeddings per node (zero for isolated nodes).
pub fn neighbor_sums(g: &Graph, emb: &DenseMatrix) -> DenseMatrix {
    let d = emb.cols();
    let mut out = DenseMatrix::zeros(g.n(), d);
    par::for_each_row_mut(out.as_mut_slice(), d, |u, row| {
        for (v, _, _) in g.neighbors(u) {
            for (o, x) in row.iter_mut().zip(emb.row(v)) {
                *o += x;
            }
        }
    });
    out
}

/// One row per undirected edge `(u, v)`, `u < v`, laid out as
/// `[F_u, F_v, E_u, E_v, N_u, N_v, weight history, reward history]`.
pub fn build_edge_states(
    g: &Graph,
    features: &DenseMatrix,
    embeddings: &DenseMatrix,
    history: &EdgeHistory,
) -> Result<DenseMatrix> {
    if features.rows() != g.n() || embeddings.rows() != g.n() {
        return Err(Error::Dimension(format!(
            "features {} / embeddings {} rows for {} nodes",
            features.rows(),
            embeddings.rows(),
            g.n()
        )));
    }
    if history.num_edges() != g.num_edges() && history.m() > 0 {
        return Err(Error::Dimension("history edge count".into()));
    }
    let (f, d, m) = (features.cols(), embeddings.cols(), history.m());
    let agg = neighbor_sums(g, embeddings);
    let width = state_dim(f, d, m);
    let mut out = DenseMatrix::zeros(g.num_edges(), width);
    let edges = g.edges();
    par::for_each_row_mut(out.as_mut_slice(), width, |e, row| {
        let (u, v) = edges[e];
        let parts: [&[f64]; 8] = [
            features.row(u),
            features.row(v),
            embeddings.row(u),
            embeddings.row(v),
            agg.row(u),
            agg.row(v),
            history.weights(e),
            history.rewards(e),
        ];
        let mut at = 0;
        for part in parts {
            row[at..at + part.len()].copy_from_slice(part);
            at += part.len();
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{bare, random_graph};

    #[test]
    fn initial_history_values() {
        let h = EdgeHistory::new(3, 5, 3);
        assert!(h.weights(2).iter().all(|&w| w == 1.0));
        assert!(h.rewards(2).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn history_rolls() {
        let mut h = EdgeHistory::new(1, 2, 4);
        h.push(&[2], &[1.5]).unwrap();
        assert_eq!(h.weights(0), &[1.0, 0.5]);
        h.push(&[4], &[-2.0]).unwrap();
        assert_eq!(h.weights(0), &[0.5, 1.0]);
        assert_eq!(h.rewards(0), &[1.5, -2.0]);
        assert!(h.push(&[0, 1], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn single_neighbor_aggregate_is_that_embedding() {
        let g = bare(2, &[(0, 1, 3)]);
        let emb = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let agg = neighbor_sums(&g, &emb);
        assert_eq!(agg.row(0), emb.row(1));
        assert_eq!(agg.row(1), emb.row(0));
    }

    #[test]
    fn layout_and_brute_force_sums() {
        let g = random_graph(10, 0.3, 5);
        let feats = DenseMatrix::from_fn(10, 2, |r, c| (r * 2 + c) as f64);
        let emb = DenseMatrix::from_fn(10, 3, |r, c| (r as f64 - 4.0) * (c as f64 + 0.5));
        let h = EdgeHistory::new(g.num_edges(), 2, 3);
        let s = build_edge_states(&g, &feats, &emb, &h).unwrap();
        assert_eq!(s.cols(), state_dim(2, 3, 2));
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            let row = s.row(e);
            assert_eq!(&row[0..2], feats.row(u));
            assert_eq!(&row[2..4], feats.row(v));
            assert_eq!(&row[4..7], emb.row(u));
            for c in 0..3 {
                let brute: f64 = g
                    .edges()
                    .iter()
                    .filter_map(|&(a, b)| match (a == u, b == u) {
                        (true, _) => Some(b),
                        (_, true) => Some(a),
                        _ => None,
                    })
                    .map(|x| emb.get(x, c))
                    .sum();
                assert!((row[10 + c] - brute).abs() < 1e-12);
            }
            assert_eq!(&row[16..18], &[1.0, 1.0]);
            assert_eq!(&row[18..20], &[0.0, 0.0]);
        }
    }
}
