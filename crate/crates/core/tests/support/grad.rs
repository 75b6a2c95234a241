//! Analytic gradients against central finite differences. Each function
//! builds one small random instance from `instance` and returns the largest
//! relative error.

use clusterpolicy::graph::{normalize_adjacency, Graph, Labels};
use clusterpolicy::nn::{
    apply_head, finite_diff_check, loss_and_grad, loss_from_probs, Activation, CsrMatrix,
    DenseMatrix, GcnLayer, GcnModel, Head, LayerKind, ModelKind, Targets,
};
use clusterpolicy::policy::{PolicyConfig, PolicyModel};
use clusterpolicy::seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-4;
const H: f64 = 1e-6;

fn random_adj(n: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v, rng.gen_range(1..4)));
            }
        }
    }
    let g = Graph::from_edges(
        n,
        &edges,
        DenseMatrix::zeros(n, 0),
        Labels::multiclass(vec![0; n]),
    )
    .unwrap();
    normalize_adjacency(&g)
}

fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn flatten(ps: &[&DenseMatrix]) -> Vec<f64> {
    ps.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

fn flatten_owned(ps: &[DenseMatrix]) -> Vec<f64> {
    flatten(&ps.iter().collect::<Vec<_>>())
}

fn unflatten(targets: Vec<&mut DenseMatrix>, flat: &[f64]) {
    let mut at = 0;
    for m in targets {
        let len = m.as_slice().len();
        m.as_mut_slice().copy_from_slice(&flat[at..at + len]);
        at += len;
    }
}

/// One layer through the linear functional `sum(logits ∘ R)`, with both
/// activations.
pub fn layer(kind: LayerKind, instance: u64) -> f64 {
    [Activation::Identity, Activation::Relu]
        .into_iter()
        .map(|act| {
            let mut rng = seed::rng(seed::derive(instance, kind as u64 * 2 + act as u64));
            let n = rng.gen_range(3..8);
            let (fin, fout) = (rng.gen_range(1..5), rng.gen_range(1..4));
            let adj = random_adj(n, &mut rng);
            let x = random_matrix(n, fin, &mut rng);
            let mut model = GcnModel {
                layers: vec![GcnLayer::new(kind, fin, fout, act, &mut rng)],
                head: Head::Sigmoid,
            };
            let r = random_matrix(n, model.out_dim(), &mut rng);
            let fwd = model.forward(&adj, &x).unwrap();
            let grads = model.backward(&adj, &fwd, &r).unwrap();
            let p0 = flatten(&model.params());
            finite_diff_check(
                |p| {
                    unflatten(model.params_mut(), p);
                    let f = model.forward(&adj, &x).unwrap();
                    f.logits.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
                },
                &p0,
                &flatten_owned(&grads),
                H,
            )
        })
        .fold(0.0, f64::max)
}

/// Mean loss with respect to the logits, for both heads.
pub fn loss(instance: u64) -> f64 {
    let mut rng = seed::rng(seed::derive(100, instance));
    let n = rng.gen_range(2..8);
    let q = rng.gen_range(2..5);
    let logits: Vec<f64> = (0..n * q).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    mask[0] = true;
    let classes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..q)).collect();
    let binary = DenseMatrix::from_fn(n, q, |_, _| rng.gen_range(0..2) as f64);
    [Head::Softmax, Head::Sigmoid]
        .into_iter()
        .map(|head| {
            let targets = match head {
                Head::Softmax => Targets::Classes(&classes),
                Head::Sigmoid => Targets::Binary(&binary),
            };
            let eval = |flat: &[f64]| {
                let l = DenseMatrix::from_vec(n, q, flat.to_vec()).unwrap();
                loss_from_probs(head, &apply_head(head, &l), targets, &mask).unwrap()
            };
            let (_, grad) = eval(&logits);
            finite_diff_check(|p| eval(p).0, &logits, grad.as_slice(), H)
        })
        .fold(0.0, f64::max)
}

/// Loss of a whole two-layer model with respect to its weights.
pub fn model_loss(instance: u64) -> f64 {
    let mut rng = seed::rng(seed::derive(200, instance));
    let n = rng.gen_range(3..8);
    let (fin, q) = (rng.gen_range(1..5), rng.gen_range(2..4));
    let adj = random_adj(n, &mut rng);
    let x = random_matrix(n, fin, &mut rng);
    let classes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..q)).collect();
    let mask = vec![true; n];
    let kind = if instance.is_multiple_of(2) { ModelKind::Gcn } else { ModelKind::Hogcn };
    let mut model = GcnModel::new(kind, fin, 3, q, Head::Softmax, &mut rng);
    let targets = Targets::Classes(&classes);
    let (_, grads) = loss_and_grad(&model, &adj, &x, targets, &mask).unwrap();
    let p0 = flatten(&model.params());
    finite_diff_check(
        |p| {
            unflatten(model.params_mut(), p);
            loss_and_grad(&model, &adj, &x, targets, &mask).unwrap().0
        },
        &p0,
        &flatten_owned(&grads),
        H,
    )
}

fn small_policy(rng: &mut ChaCha8Rng) -> (PolicyModel, DenseMatrix) {
    let dim = rng.gen_range(2..7);
    let edges = rng.gen_range(1..6);
    let cfg = PolicyConfig {
        p: rng.gen_range(1..4),
        hidden: rng.gen_range(2..6),
        ..PolicyConfig::default()
    };
    let mut model = PolicyModel::new(dim, cfg, rng).unwrap();
    for b in [&mut model.actor.b1, &mut model.critic.b1] {
        b.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    (model, random_matrix(edges, dim, rng))
}

/// Mean log-probability of random actions with respect to the actor.
pub fn actor(instance: u64) -> f64 {
    let mut rng = seed::rng(seed::derive(300, instance));
    let (mut policy, states) = small_policy(&mut rng);
    let na = policy.num_actions();
    let actions: Vec<usize> = (0..states.rows()).map(|_| rng.gen_range(0..na)).collect();
    let (_, grads) = policy.log_prob_grad(&states, &actions).unwrap();
    let p0 = flatten(&policy.actor.params());
    finite_diff_check(
        |p| {
            unflatten(policy.actor.params_mut(), p);
            policy.log_prob_grad(&states, &actions).unwrap().0
        },
        &p0,
        &flatten_owned(&grads),
        H,
    )
}

/// Mean critic value with respect to the critic.
pub fn critic(instance: u64) -> f64 {
    let mut rng = seed::rng(seed::derive(400, instance));
    let (mut policy, states) = small_policy(&mut rng);
    let (v, grads) = policy.critic_grad(&states).unwrap();
    assert!((v - policy.critic_value(&states).unwrap()).abs() < 1e-12);
    let p0 = flatten(&policy.critic.params());
    finite_diff_check(
        |p| {
            unflatten(policy.critic.params_mut(), p);
            policy.critic_value(&states).unwrap()
        },
        &p0,
        &flatten_owned(&grads),
        H,
    )
}
