//! Minibatch ClusterGCN training, micro-F1 evaluation and edge rewards.

use std::rc::Rc;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, Labels, Subgraph, TaskKind};
use crate::nn::{
    adam_step, argmax, loss_from_probs, AdamState, CsrMatrix, GcnModel, Head, ModelKind,
};
use crate::partition::{cluster_subgraphs, merge_clusters, ClusterConfig};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub model: ModelKind,
    pub hidden: usize,
    /// Epochs over the cluster batches.
    pub iters: usize,
    pub lr: f64,
    /// Inverted-dropout rate on layer inputs; 0 disables it.
    pub dropout: f64,
    /// Clusters merged into one batch.
    pub bsize: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            model: ModelKind::Gcn,
            hidden: 128,
            iters: 50,
            lr: 0.01,
            dropout: 0.0,
            bsize: 1,
        }
    }
}

/// Starting point for training.
#[derive(Clone, Copy, Debug)]
pub enum Init<'a> {
    /// New Glorot weights drawn from the init stream of the seed.
    Fresh,
    /// Continue from an existing model.
    Warm(&'a GcnModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
    pub skipped_batches: usize,
    pub epochs: usize,
}

pub fn head_for(task: TaskKind) -> Head {
    match task {
        TaskKind::Multiclass => Head::Softmax,
        TaskKind::Multilabel => Head::Sigmoid,
    }
}

/// A ready-to-run batch: normalized adjacency, features, labels, mask.
struct Batch {
    adj: CsrMatrix,
    sub: Subgraph,
    mask: Vec<bool>,
}

impl Batch {
    fn new(sub: Subgraph, labeled: &[bool]) -> Self {
        let mask = sub.nodes.iter().map(|&u| labeled[u]).collect();
        Batch {
            adj: normalize_adjacency(&sub.graph),
            sub,
            mask,
        }
    }
}

/// Streams derived from the training seed.
const INIT_STREAM: u64 = 0;
const ORDER_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

fn initial_model(g: &Graph, cfg: &TrainerConfig, seed_: u64, init: Init<'_>) -> GcnModel {
    match init {
        Init::Fresh => GcnModel::new(
            cfg.model,
            g.features().cols(),
            cfg.hidden,
            g.labels().q(),
            head_for(g.task_kind()),
            &mut seed::rng(seed::derive(seed_, INIT_STREAM)),
        ),
        Init::Warm(m) => m.clone(),
    }
}

fn validate(cfg: &TrainerConfig, labeled: &[bool], g: &Graph) -> Result<()> {
    if cfg.iters == 0 {
        return Err(Error::InvalidParam("iters must be ≥ 1".into()));
    }
    if cfg.hidden == 0 || cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(Error::InvalidParam("hidden and lr must be positive".into()));
    }
    if labeled.len() != g.n() {
        return Err(Error::Dimension("labeled mask length".into()));
    }
    Ok(())
}

/// Runs one optimizer step on `batch`. `Ok(None)` means no labeled nodes.
fn step(
    model: &mut GcnModel,
    adam: &mut AdamState,
    batch: &Batch,
    cfg: &TrainerConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Option<f64>> {
    if !batch.mask.iter().any(|&b| b) {
        return Ok(None);
    }
    let g = &batch.sub.graph;
    let fwd = model.forward_train(&batch.adj, g.features(), cfg.dropout, rng)?;
    let (loss, dlogits) =
        loss_from_probs(model.head, &fwd.probs, g.labels().targets(), &batch.mask)?;
    let grads = model.backward(&batch.adj, &fwd, &dlogits)?;
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gcn loss or gradient"));
    }
    adam_step(&mut model.params_mut(), &grads, adam, cfg.lr)?;
    Ok(Some(loss))
}

fn run_epochs(
    mut model: GcnModel,
    cfg: &TrainerConfig,
    seed_: u64,
    mut batches_for_epoch: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> Result<Vec<Rc<Batch>>>,
    on_epoch: &mut dyn FnMut(usize, &GcnModel) -> Result<()>,
) -> Result<(GcnModel, TrainReport)> {
    let mut adam = AdamState::new(&model.params());
    let mut order_rng = seed::rng(seed::derive(seed_, ORDER_STREAM));
    let mut drop_rng = seed::rng(seed::derive(seed_, DROPOUT_STREAM));
    let mut report = TrainReport {
        step_losses: Vec::new(),
        epoch_losses: Vec::new(),
        final_loss: f64::NAN,
        skipped_batches: 0,
        epochs: cfg.iters,
    };
    for epoch in 0..cfg.iters {
        let mut sum = 0.0;
        let mut count = 0;
        for batch in batches_for_epoch(&mut order_rng)? {
            match step(&mut model, &mut adam, &batch, cfg, &mut drop_rng)? {
                Some(loss) => {
                    report.step_losses.push(loss);
                    sum += loss;
                    count += 1;
                }
                None => report.skipped_batches += 1,
            }
        }
        if count == 0 {
            return Err(Error::NoLabeledNodes);
        }
        report.epoch_losses.push(sum / count as f64);
        on_epoch(epoch, &model)?;
    }
    if report.skipped_batches > 0 {
        warn!(
            "skipped {} batches without labeled nodes",
            report.skipped_batches
        );
    }
    report.final_loss = *report.epoch_losses.last().unwrap();
    Ok((model, report))
}

/// Trains on the clusters of `clusters`.
///
/// Each epoch permutes the clusters uniformly and walks them in chunks of
/// `bsize`; a chunk is merged with the edges between its clusters restored.
/// `labeled` marks the nodes of `g` that contribute to the loss.
pub fn train_clustergcn(
    g: &Graph,
    clusters: &ClusterConfig,
    labeled: &[bool],
    cfg: &TrainerConfig,
    seed_: u64,
    init: Init<'_>,
) -> Result<(GcnModel, TrainReport)> {
    train_clustergcn_monitored(g, clusters, labeled, cfg, seed_, init, &mut |_, _| Ok(()))
}

/// [`train_clustergcn`] calling `on_epoch(epoch, model)` after every epoch.
pub fn train_clustergcn_monitored(
    g: &Graph,
    clusters: &ClusterConfig,
    labeled: &[bool],
    cfg: &TrainerConfig,
    seed_: u64,
    init: Init<'_>,
    on_epoch: &mut dyn FnMut(usize, &GcnModel) -> Result<()>,
) -> Result<(GcnModel, TrainReport)> {
    validate(cfg, labeled, g)?;
    if cfg.bsize == 0 || cfg.bsize > clusters.k {
        return Err(Error::InvalidParam(format!(
            "bsize = {} needs 1 ≤ bsize ≤ k = {}",
            cfg.bsize, clusters.k
        )));
    }
    let model = initial_model(g, cfg, seed_, init);
    if cfg.bsize == 1 {
        let singles: Vec<Rc<Batch>> = cluster_subgraphs(g, clusters)?
            .into_iter()
            .map(|s| Rc::new(Batch::new(s, labeled)))
            .collect();
        run_epochs(
            model,
            cfg,
            seed_,
            |rng| {
                let mut order = singles.clone();
                order.shuffle(rng);
                Ok(order)
            },
            on_epoch,
        )
    } else {
        run_epochs(
            model,
            cfg,
            seed_,
            |rng| {
                let mut ids: Vec<usize> = (0..clusters.k).collect();
                ids.shuffle(rng);
                ids.chunks(cfg.bsize)
                    .map(|chunk| {
                        Ok(Rc::new(Batch::new(
                            merge_clusters(g, clusters, chunk)?,
                            labeled,
                        )))
                    })
                    .collect()
            },
            on_epoch,
        )
    }
}

/// Plain full-graph training with the same seed streams as
/// [`train_clustergcn`].
pub fn train_full_batch(
    g: &Graph,
    labeled: &[bool],
    cfg: &TrainerConfig,
    seed_: u64,
    init: Init<'_>,
) -> Result<(GcnModel, TrainReport)> {
    validate(cfg, labeled, g)?;
    let model = initial_model(g, cfg, seed_, init);
    let all: Vec<usize> = (0..g.n()).collect();
    let whole = Rc::new(Batch::new(
        Subgraph {
            graph: g.clone(),
            nodes: all,
        },
        labeled,
    ));
    run_epochs(
        model,
        cfg,
        seed_,
        |_| Ok(vec![whole.clone()]),
        &mut |_, _| Ok(()),
    )
}

/// Row-major `n × q` binary predictions: one-hot argmax for multiclass,
/// threshold 0.5 for multilabel.
pub fn predict(model: &GcnModel, g: &Graph) -> Result<Vec<bool>> {
    let fwd = model.forward(&normalize_adjacency(g), g.features())?;
    let (n, q) = fwd.probs.shape();
    let mut out = vec![false; n * q];
    for r in 0..n {
        let row = fwd.probs.row(r);
        match model.head {
            Head::Softmax => out[r * q + argmax(row)] = true,
            Head::Sigmoid => {
                for (j, &p) in row.iter().enumerate() {
                    out[r * q + j] = p >= 0.5;
                }
            }
        }
    }
    Ok(out)
}

/// Micro-averaged F1 over the `(node, label)` pairs of masked rows.
///
/// When the masked rows have no positives in either `pred` or `truth`
/// (`TP + FP + FN = 0`) the score is defined as 1.
pub fn micro_f1(pred: &[bool], truth: &[bool], q: usize, mask: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || q == 0 || pred.len() != mask.len() * q {
        return Err(Error::Dimension(format!(
            "pred {} / truth {} entries for {} rows of width {q}",
            pred.len(),
            truth.len(),
            mask.len()
        )));
    }
    let (mut tp, mut fp, mut fne) = (0u64, 0u64, 0u64);
    for (r, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for j in r * q..(r + 1) * q {
            match (pred[j], truth[j]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fne += 1,
                (false, false) => {}
            }
        }
    }
    if tp + fp + fne == 0 {
        log::debug!("micro-F1 on rows without positives; defined as 1");
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fne) as f64)
}

/// Micro-F1 of `model` on the masked nodes of `g`.
pub fn evaluate(model: &GcnModel, g: &Graph, mask: &[bool]) -> Result<f64> {
    let pred = predict(model, g)?;
    micro_f1(&pred, &g.labels().to_binary(), g.labels().q(), mask)
}

/// Per-node score: `±1` for a correct/incorrect class (multiclass), or the
/// sum of `±1` over labels (multilabel).
pub fn node_scores(pred: &[bool], labels: &Labels) -> Vec<f64> {
    let q = labels.q();
    let truth = labels.to_binary();
    (0..labels.len())
        .map(|r| {
            let row = r * q..(r + 1) * q;
            match labels {
                Labels::Multiclass { .. } => {
                    if pred[row.clone()] == truth[row] {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Labels::Multilabel(_) => pred[row.clone()]
                    .iter()
                    .zip(&truth[row])
                    .map(|(a, b)| if a == b { 1.0 } else { -1.0 })
                    .sum(),
            }
        })
        .collect()
}

/// Edge scores `sc_u + sc_v` over the undirected edges of `g` and their mean
/// (0 for an edgeless graph).
pub fn edge_rewards_from_predictions(g: &Graph, pred: &[bool]) -> (Vec<f64>, f64) {
    let sc = node_scores(pred, g.labels());
    let scores: Vec<f64> = g.edges().iter().map(|&(u, v)| sc[u] + sc[v]).collect();
    let mean = if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    (scores, mean)
}

pub fn edge_rewards(model: &GcnModel, g: &Graph) -> Result<(Vec<f64>, f64)> {
    Ok(edge_rewards_from_predictions(g, &predict(model, g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{bare, random_graph};
    use crate::partition::partition;

    fn labeled_pair(classes: Vec<usize>) -> Graph {
        Graph::from_edges(
            2,
            &[(0, 1, 1)],
            crate::nn::DenseMatrix::zeros(2, 0),
            Labels::multiclass(classes),
        )
        .unwrap()
    }

    #[test]
    fn f1_extremes() {
        let truth = vec![true, false, false, true, true, false];
        let mask = vec![true; 3];
        assert_eq!(micro_f1(&truth, &truth, 2, &mask).unwrap(), 1.0);
        let not: Vec<bool> = truth.iter().map(|b| !b).collect();
        assert_eq!(micro_f1(&not, &truth, 2, &mask).unwrap(), 0.0);
        assert_eq!(micro_f1(&[false; 6], &[false; 6], 2, &mask).unwrap(), 1.0);
        assert!(micro_f1(&truth, &truth, 4, &mask).is_err());
    }

    #[test]
    fn reward_examples() {
        let g = labeled_pair(vec![0, 1]);
        let right = vec![true, false, false, true];
        assert_eq!(edge_rewards_from_predictions(&g, &right).1, 2.0);
        let wrong = vec![false, true, true, false];
        assert_eq!(edge_rewards_from_predictions(&g, &wrong).1, -2.0);
        let half = vec![true, false, true, false];
        assert_eq!(edge_rewards_from_predictions(&g, &half).1, 0.0);

        let m = crate::nn::DenseMatrix::from_vec(2, 3, vec![1., 0., 1., 0., 1., 1.]).unwrap();
        let g = Graph::from_edges(
            2,
            &[(0, 1, 1)],
            crate::nn::DenseMatrix::zeros(2, 0),
            Labels::multilabel(m).unwrap(),
        )
        .unwrap();
        let pred = g.labels().to_binary();
        assert_eq!(edge_rewards_from_predictions(&g, &pred).0, vec![6.0]);
    }

    #[test]
    fn zero_iters_rejected() {
        let g = random_graph(20, 0.2, 1);
        let cfg = TrainerConfig {
            iters: 0,
            ..TrainerConfig::default()
        };
        assert!(train_full_batch(&g, &[true; 20], &cfg, 0, Init::Fresh).is_err());
    }

    #[test]
    fn all_unlabeled_is_an_error() {
        let g = random_graph(20, 0.2, 1);
        let clusters = partition(&g, 2, 0).unwrap();
        let cfg = TrainerConfig {
            iters: 2,
            hidden: 4,
            ..TrainerConfig::default()
        };
        let err = train_clustergcn(&g, &clusters, &[false; 20], &cfg, 0, Init::Fresh);
        assert!(matches!(err, Err(Error::NoLabeledNodes)));
    }

    #[test]
    fn single_cluster_matches_full_batch() {
        let g = random_graph(30, 0.15, 4);
        let one = ClusterConfig::new(&g, 1, vec![0; 30]).unwrap();
        let labeled: Vec<bool> = (0..30).map(|i| i % 3 != 0).collect();
        let cfg = TrainerConfig {
            iters: 8,
            hidden: 8,
            dropout: 0.1,
            ..TrainerConfig::default()
        };
        let (ma, ra) = train_clustergcn(&g, &one, &labeled, &cfg, 9, Init::Fresh).unwrap();
        let (mb, rb) = train_full_batch(&g, &labeled, &cfg, 9, Init::Fresh).unwrap();
        assert_eq!(ra.step_losses, rb.step_losses);
        assert_eq!(ma, mb);
    }

    #[test]
    fn merged_batches_train_and_are_reproducible() {
        let g = random_graph(40, 0.1, 2);
        let clusters = partition(&g, 4, 0).unwrap();
        let cfg = TrainerConfig {
            iters: 5,
            hidden: 8,
            bsize: 2,
            ..TrainerConfig::default()
        };
        let labeled = vec![true; 40];
        let (_, a) = train_clustergcn(&g, &clusters, &labeled, &cfg, 1, Init::Fresh).unwrap();
        let (_, b) = train_clustergcn(&g, &clusters, &labeled, &cfg, 1, Init::Fresh).unwrap();
        assert_eq!(a.step_losses.len(), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn edgeless_reward_is_zero() {
        let g = bare(3, &[]);
        let pred = vec![false; 3 * g.labels().q()];
        assert_eq!(edge_rewards_from_predictions(&g, &pred).1, 0.0);
    }
}
