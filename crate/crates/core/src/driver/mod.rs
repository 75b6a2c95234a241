//! The search loop: reweight edges, partition, train, score, update the agent.
//!
//! [`search`] runs the nonepisodic loop and keeps the clusters with the best
//! validation micro-F1. [`final_train`] trains a fresh model for longer on a
//! chosen configuration and reports test micro-F1; [`baseline_clustergcn`]
//! does the same for a partition of the unit-weight graph.

mod config;
mod rundir;

use std::collections::VecDeque;
use std::time::Instant;

use log::{info, warn};

use crate::error::{Error, Result};
use crate::graph::{
    induced_subgraph, load_graph, load_splits, svd_features, Graph, SplitMasks, Subgraph,
    SvdOptions,
};
use crate::nn::{DenseMatrix, GcnModel};
use crate::partition::{partition_with, restore_weights, ClusterConfig};
use crate::policy::{
    action_weight, build_edge_states, epsilon, state_dim, ActionMode, EdgeHistory, PolicyModel,
    UpdateRule,
};
use crate::seed;
use crate::trainer::{
    edge_rewards, evaluate, train_clustergcn, train_clustergcn_monitored, Init,
};

pub use config::{DataConfig, SearchConfig, SearchParams, Seeds};
pub use rundir::{read_assignments, write_metrics, write_run, METRICS_FILE};

/// A dataset split into its train, validation and test graphs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub graph: Graph,
    pub splits: SplitMasks,
    pub train: Subgraph,
    pub val: Subgraph,
    pub test: Subgraph,
    /// Node embeddings of the train graph used in edge states.
    pub embeddings: DenseMatrix,
}

impl Prepared {
    pub fn new(graph: Graph, splits: SplitMasks, embed_dim: usize, svd_seed: u64) -> Result<Self> {
        let train = induced_subgraph(&graph, &splits.train)?;
        let val = induced_subgraph(&graph, &splits.val)?;
        let test = induced_subgraph(&graph, &splits.test)?;
        let embeddings = if embed_dim == 0 {
            DenseMatrix::zeros(train.graph.n(), 0)
        } else {
            let opts = SvdOptions {
                seed: svd_seed,
                ..SvdOptions::default()
            };
            svd_features(&train.graph, embed_dim, opts)?
        };
        Ok(Prepared {
            graph,
            splits,
            train,
            val,
            test,
            embeddings,
        })
    }

    /// Loads the files named by `cfg.data`. Missing features are replaced by
    /// SVD features; a missing split file by a stratified split.
    pub fn load(cfg: &SearchConfig) -> Result<Self> {
        let d = &cfg.data;
        let feats = d.path(&d.features);
        let graph = load_graph(
            &d.path(&d.edges),
            feats.exists().then_some(feats.as_path()),
            &d.path(&d.labels),
            d.task,
        )?;
        let graph = if graph.features().cols() == 0 {
            let opts = SvdOptions {
                seed: cfg.seeds.svd,
                ..SvdOptions::default()
            };
            let f = svd_features(&graph, d.svd_dim, opts)?;
            graph.with_features(f)?
        } else {
            graph
        };
        let split_path = d.path(&d.splits);
        let splits = if split_path.exists() {
            load_splits(&split_path, graph.n())?
        } else {
            SplitMasks::stratified(graph.labels(), d.train_frac, d.val_frac, cfg.seeds.split)?
        };
        Prepared::new(graph, splits, cfg.policy.embed_dim, cfg.seeds.svd)
    }
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchRecord {
    pub step: usize,
    pub epsilon: f64,
    pub action_hist: Vec<usize>,
    pub reward: f64,
    pub val_f1: f64,
    /// The step improved the best validation score.
    pub best: bool,
    pub wall_ms: u64,
    pub skipped: bool,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub records: Vec<SearchRecord>,
    /// Best clusters over the train graph's local node ids.
    pub best: ClusterConfig,
    pub best_val: f64,
    pub best_step: usize,
    pub best_model: GcnModel,
    pub policy: PolicyModel,
}

struct StepResult {
    clusters: ClusterConfig,
    model: GcnModel,
    val_f1: f64,
    scores: Vec<f64>,
    reward: f64,
}

fn run_step(
    cfg: &SearchConfig,
    data: &Prepared,
    actions: &[usize],
    warm: Option<&GcnModel>,
) -> Result<StepResult> {
    let train = &data.train.graph;
    let weights: Vec<u32> = actions.iter().map(|&a| action_weight(a)).collect();
    let reweighted = train.with_edge_weights(&weights)?;
    let clusters = partition_with(&reweighted, cfg.search.k, cfg.seeds.partition, &cfg.partition)?;
    let restored = restore_weights(&reweighted, train, &clusters)?;
    debug_assert_eq!(&restored, train);
    let labeled = vec![true; train.n()];
    let init = match warm {
        Some(m) => Init::Warm(m),
        None => Init::Fresh,
    };
    let tcfg = cfg.search.trainer(cfg.search.iters);
    let (model, _) = train_clustergcn(&restored, &clusters, &labeled, &tcfg, cfg.seeds.gcn_init, init)?;
    let val_graph = &data.val.graph;
    let val_f1 = evaluate(&model, val_graph, &vec![true; val_graph.n()])?;
    let (scores, reward) = edge_rewards(&model, train)?;
    if !reward.is_finite() || !val_f1.is_finite() {
        return Err(Error::NonFinite("step reward"));
    }
    Ok(StepResult {
        clusters,
        model,
        val_f1,
        scores,
        reward,
    })
}

/// Runs `cfg.search.T` steps of the edge-weight search.
pub fn search(cfg: &SearchConfig, data: &Prepared) -> Result<SearchOutcome> {
    cfg.validate()?;
    let train = &data.train.graph;
    if train.num_edges() == 0 {
        return Err(Error::InvalidParam("train graph has no edges".into()));
    }
    if cfg.search.k > train.n() {
        return Err(Error::InvalidParam(format!(
            "k = {} exceeds {} train nodes",
            cfg.search.k,
            train.n()
        )));
    }
    let pc = &cfg.policy;
    let features = train.features();
    let dim = state_dim(features.cols(), data.embeddings.cols(), pc.m);
    let mut policy = PolicyModel::new(dim, pc.clone(), &mut seed::rng(cfg.seeds.policy_init))?;
    let mut explore = seed::rng(cfg.seeds.exploration);
    let mut history = EdgeHistory::new(train.num_edges(), pc.m, pc.p);
    let mut states = build_edge_states(train, features, &data.embeddings, &history)?;

    let mut records = Vec::with_capacity(cfg.search.t);
    let mut best: Option<(f64, usize, ClusterConfig, GcnModel)> = None;
    let mut last_model: Option<GcnModel> = None;
    let mut window: VecDeque<(DenseMatrix, Vec<usize>, f64)> = VecDeque::new();

    for t in 0..cfg.search.t {
        let started = Instant::now();
        let eps = epsilon(t, pc.eps_start, pc.eps_end, pc.eps_decay)?;
        let actions = policy.select_actions(&states, eps, ActionMode::Sample, &mut explore)?;
        let mut hist = vec![0usize; pc.p + 1];
        actions.iter().for_each(|&a| hist[a] += 1);
        debug_assert_eq!(hist.iter().sum::<usize>(), train.num_edges());

        let warm = if cfg.search.warm_start {
            last_model.as_ref()
        } else {
            None
        };
        let step = match run_step(cfg, data, &actions, warm) {
            Ok(s) => s,
            Err(Error::NonFinite(what)) => {
                warn!("step {t}: non-finite {what}, skipped");
                records.push(SearchRecord {
                    step: t,
                    epsilon: eps,
                    action_hist: hist,
                    reward: f64::NAN,
                    val_f1: f64::NAN,
                    best: false,
                    wall_ms: 0,
                    skipped: true,
                });
                continue;
            }
            Err(e) => return Err(e),
        };

        let improved = best.as_ref().is_none_or(|(v, ..)| step.val_f1 > *v);
        if improved {
            best = Some((step.val_f1, t, step.clusters.clone(), step.model.clone()));
        }

        history.push(&actions, &step.scores)?;
        let next = build_edge_states(train, features, &data.embeddings, &history)?;
        match pc.update {
            UpdateRule::ActorCritic => {
                policy.actor_critic_update(&states, &actions, step.reward, &next)?;
            }
            UpdateRule::Reinforce => {
                window.push_back((states, actions, step.reward));
                if window.len() == pc.window {
                    let rewards: Vec<f64> = window.iter().map(|w| w.2).collect();
                    let ret = crate::policy::returns(&rewards, pc.gamma, pc.window)[0];
                    let (s0, a0, _) = window.pop_front().unwrap();
                    policy.reinforce_update(&s0, &a0, ret)?;
                }
            }
        }
        states = next;
        if cfg.search.warm_start {
            last_model = Some(step.model);
        }

        let wall_ms = if cfg.search.wall_clock {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        info!(
            "step {t}: eps {eps:.3} reward {:.4} val_f1 {:.4}{}",
            step.reward,
            step.val_f1,
            if improved { " *" } else { "" }
        );
        records.push(SearchRecord {
            step: t,
            epsilon: eps,
            action_hist: hist,
            reward: step.reward,
            val_f1: step.val_f1,
            best: improved,
            wall_ms,
            skipped: false,
        });
    }
    let (best_val, best_step, best_clusters, best_model) =
        best.ok_or(Error::NonFinite("every search step"))?;
    Ok(SearchOutcome {
        records,
        best: best_clusters,
        best_val,
        best_step,
        best_model,
        policy,
    })
}

/// Result of a long training run.
#[derive(Clone, Debug)]
pub struct FinalReport {
    pub model: GcnModel,
    pub test_f1: f64,
    pub best_val_f1: f64,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
}

/// Seed stream for final training, shared with the baseline.
fn final_seed(cfg: &SearchConfig) -> u64 {
    seed::derive(cfg.seeds.gcn_init, 1)
}

/// Trains for `final_epochs` on `clusters` and returns test micro-F1 of the
/// weights with the best validation score.
pub fn final_train(clusters: &ClusterConfig, cfg: &SearchConfig, data: &Prepared) -> Result<FinalReport> {
    let train = &data.train.graph;
    let val = &data.val.graph;
    let val_mask = vec![true; val.n()];
    let tcfg = cfg.search.trainer(cfg.search.final_epochs);
    let mut best: Option<(f64, usize, GcnModel)> = None;
    let mut err = None;
    let mut watch = |epoch: usize, model: &GcnModel| -> Result<()> {
        match evaluate(model, val, &val_mask) {
            Ok(f1) => {
                if best.as_ref().is_none_or(|(b, ..)| f1 > *b) {
                    best = Some((f1, epoch, model.clone()));
                }
            }
            Err(e) => err = Some(e),
        }
        Ok(())
    };
    train_clustergcn_monitored(
        train,
        clusters,
        &vec![true; train.n()],
        &tcfg,
        final_seed(cfg),
        Init::Fresh,
        &mut watch,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let (best_val_f1, best_epoch, model) = best.expect("at least one epoch");
    let test = &data.test.graph;
    let test_f1 = evaluate(&model, test, &vec![true; test.n()])?;
    Ok(FinalReport {
        model,
        test_f1,
        best_val_f1,
        best_epoch,
    })
}

/// Partition of the train graph with every edge weight set to 1.
pub fn baseline_clusters(cfg: &SearchConfig, data: &Prepared) -> Result<ClusterConfig> {
    let train = &data.train.graph;
    let unit = train.with_edge_weights(&vec![1; train.num_edges()])?;
    partition_with(&unit, cfg.search.k, cfg.seeds.partition, &cfg.partition)
}

/// Final training on the unit-weight partition.
pub fn baseline_clustergcn(cfg: &SearchConfig, data: &Prepared) -> Result<(ClusterConfig, FinalReport)> {
    let clusters = baseline_clusters(cfg, data)?;
    let report = final_train(&clusters, cfg, data)?;
    Ok((clusters, report))
}
