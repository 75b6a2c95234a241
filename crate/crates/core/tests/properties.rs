use proptest::prelude::*;

use clusterpolicy::analysis::label_entropy;
use clusterpolicy::graph::{
    induced_by_nodes, induced_subgraph, normalize_adjacency, Graph, Labels,
};
use clusterpolicy::nn::{apply_head, DenseMatrix, Head};
use clusterpolicy::partition::{partition, restore_weights};
use clusterpolicy::policy::{epsilon, PolicyConfig, PolicyModel};
use clusterpolicy::seed;
use clusterpolicy::trainer::edge_rewards_from_predictions;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 1u32..9);
        (Just(n), prop::collection::vec(edge, 0..3 * n), 1usize..4).prop_map(|(n, edges, q)| {
            let classes = (0..n).map(|i| (i * 7 + 3) % q).collect();
            Graph::from_edges(n, &edges, DenseMatrix::zeros(n, 0), Labels::multiclass(classes))
                .unwrap()
        })
    })
}

fn connected_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    graph_strategy(max_n).prop_filter("needs an edge", |g| g.num_edges() > 0)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn graph_storage_is_symmetric_and_sorted(g in graph_strategy(20)) {
        g.check_invariants().unwrap();
        for u in 0..g.n() {
            let nbrs: Vec<usize> = g.neighbors(u).map(|(v, _, _)| v).collect();
            prop_assert!(nbrs.windows(2).all(|w| w[0] < w[1]));
            for (v, w, e) in g.neighbors(u) {
                prop_assert!(w > 0);
                prop_assert_eq!(g.weight_between(v, u), Some(w));
                let (a, b) = g.edges()[e];
                prop_assert_eq!((a, b), (u.min(v), u.max(v)));
            }
        }
    }

    #[test]
    fn normalized_adjacency_matches_formula(g in graph_strategy(30)) {
        let a = normalize_adjacency(&g).to_dense();
        let deg: Vec<f64> = (0..g.n()).map(|u| 1.0 + g.weighted_degree(u) as f64).collect();
        for u in 0..g.n() {
            for v in 0..g.n() {
                let raw = if u == v { 1.0 } else { g.weight_between(u, v).unwrap_or(0) as f64 };
                let expect = raw / (deg[u] * deg[v]).sqrt();
                prop_assert!((a.get(u, v) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nested_induced_subgraphs_compose(
        g in graph_strategy(20),
        outer_bits in prop::collection::vec(any::<bool>(), 20),
        inner_bits in prop::collection::vec(any::<bool>(), 20),
    ) {
        let n = g.n();
        let mut outer: Vec<bool> = outer_bits[..n].to_vec();
        outer[0] = true;
        let mut inner: Vec<bool> = (0..n).map(|i| outer[i] && inner_bits[i]).collect();
        inner[0] = true;
        let first = induced_subgraph(&g, &outer).unwrap();
        let local_inner: Vec<bool> = first.nodes.iter().map(|&p| inner[p]).collect();
        let second = induced_subgraph(&first.graph, &local_inner).unwrap();
        let direct = induced_subgraph(&g, &inner).unwrap();
        prop_assert_eq!(&second.graph, &direct.graph);
        let composed: Vec<usize> = second.nodes.iter().map(|&i| first.nodes[i]).collect();
        prop_assert_eq!(composed, direct.nodes);
    }

    #[test]
    fn partition_is_exact_and_deterministic(g in graph_strategy(40), k in 1usize..6, s in any::<u64>()) {
        let k = k.min(g.n());
        let a = partition(&g, k, s).unwrap();
        let b = partition(&g, k, s).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.k, k);
        prop_assert!(a.sizes().iter().all(|&c| c > 0));
        let cut: Vec<usize> = g
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, &(u, v))| a.assign[u] != a.assign[v])
            .map(|(e, _)| e)
            .collect();
        prop_assert_eq!(&a.cut_edges, &cut);
    }

    #[test]
    fn restore_gives_original_weights(g in connected_graph(25), actions in prop::collection::vec(0u32..4, 75)) {
        let w: Vec<u32> = (0..g.num_edges()).map(|e| 1 << actions[e % actions.len()]).collect();
        let re = g.with_edge_weights(&w).unwrap();
        let cfg = partition(&re, 2.min(g.n()), 3).unwrap();
        let back = restore_weights(&re, &g, &cfg).unwrap();
        let mut a = back.edge_weights();
        let mut b = g.edge_weights();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert_eq!(back, g);
    }

    #[test]
    fn head_outputs_are_distributions(vals in prop::collection::vec(-30.0f64..30.0, 1..40), cols in 1usize..5) {
        let rows = vals.len() / cols;
        prop_assume!(rows > 0);
        let logits = DenseMatrix::from_vec(rows, cols, vals[..rows * cols].to_vec()).unwrap();
        let soft = apply_head(Head::Softmax, &logits);
        for r in 0..rows {
            prop_assert!((soft.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let sig = apply_head(Head::Sigmoid, &logits);
        prop_assert!(sig.as_slice().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn edge_rewards_are_bounded(g in graph_strategy(20), bits in prop::collection::vec(any::<bool>(), 20 * 3)) {
        let q = g.labels().q();
        let pred = bits[..g.n() * q].to_vec();
        let (scores, mean) = edge_rewards_from_predictions(&g, &pred);
        let bound = 2.0 * q as f64;
        prop_assert_eq!(scores.len(), g.num_edges());
        prop_assert!(scores.iter().all(|s| s.abs() <= bound));
        prop_assert!(mean.abs() <= bound);
    }

    #[test]
    fn epsilon_decreases(frac in 0.0f64..1.0, start in 0.2f64..1.0, gap in 0.01f64..0.19, decay in 1.0f64..500.0) {
        // Past about 25 decay lengths ε equals ε_end in f64.
        let t = (frac * 25.0 * decay) as usize;
        let end = start - gap;
        let now = epsilon(t, start, end, decay).unwrap();
        let next = epsilon(t + 1, start, end, decay).unwrap();
        prop_assert!(next < now);
        prop_assert!(now <= start && now >= end);
    }

    #[test]
    fn policy_is_a_per_edge_function(edges in 1usize..12, s in any::<u64>()) {
        let dim = 5;
        let cfg = PolicyConfig { hidden: 8, ..PolicyConfig::default() };
        let mut rng = seed::rng(s);
        let policy = PolicyModel::new(dim, cfg, &mut rng).unwrap();
        let states = DenseMatrix::from_fn(edges, dim, |r, c| ((r * 31 + c * 7) % 11) as f64 / 5.0 - 1.0);
        let probs = policy.action_probs(&states).unwrap();
        for r in 0..edges {
            prop_assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let perm: Vec<usize> = (0..edges).rev().collect();
        let shuffled = policy.action_probs(&states.select_rows(&perm)).unwrap();
        for (i, &r) in perm.iter().enumerate() {
            prop_assert_eq!(shuffled.row(i), probs.row(r));
        }
    }

    #[test]
    fn entropy_ignores_node_order(
        classes in prop::collection::vec(0usize..4, 1..30),
        s in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let labels = Labels::multiclass(classes.clone());
        let mut nodes: Vec<usize> = (0..classes.len()).collect();
        let h = label_entropy(&nodes, &labels).unwrap();
        nodes.shuffle(&mut seed::rng(s));
        prop_assert_eq!(label_entropy(&nodes, &labels).unwrap(), h);
        prop_assert!(h >= 0.0 && h <= labels.q() as f64 + 1e-12);

        // Same label multiset on different nodes.
        let mut relabeled = classes.clone();
        relabeled.shuffle(&mut seed::rng(s ^ 1));
        let other = Labels::multiclass(relabeled);
        let all: Vec<usize> = (0..classes.len()).collect();
        prop_assert!((label_entropy(&all, &other).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn induced_by_nodes_keeps_inner_edges(g in graph_strategy(20), pick in prop::collection::vec(any::<bool>(), 20)) {
        let nodes: Vec<usize> = (0..g.n()).filter(|&i| pick[i] || i == 0).collect();
        let sub = induced_by_nodes(&g, &nodes).unwrap();
        let inside = g
            .edges()
            .iter()
            .filter(|(u, v)| nodes.contains(u) && nodes.contains(v))
            .count();
        prop_assert_eq!(sub.graph.num_edges(), inside);
    }
}
