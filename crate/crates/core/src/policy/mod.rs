//! The edge-weight agent: per-edge states, an actor that picks one of `p + 1`
//! exponential weights per edge, a critic, and the policy-gradient updates.

mod state;

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_tensors, write_tensors};
use crate::nn::{adam_step, sgd_step, softmax_row, AdamState, DenseMatrix, Mlp};

pub use state::{build_edge_states, neighbor_sums, state_dim, EdgeHistory};

pub const POLICY_MAGIC: [u8; 4] = *b"PLCY";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    ActorCritic,
    Reinforce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain ascent `θ ← θ + α δ ∇`.
    Sgd,
    /// Adam on the negated objective with learning rate `α`.
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Largest action index; actions map to weights `2^0 … 2^p`.
    pub p: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay: f64,
    pub gamma: f64,
    pub alpha_actor: f64,
    pub alpha_critic: f64,
    /// History length for past weights and rewards.
    pub m: usize,
    pub hidden: usize,
    /// Node-embedding width used in edge states.
    pub embed_dim: usize,
    pub update: UpdateRule,
    pub optimizer: Optimizer,
    /// Return window for the REINFORCE update.
    pub window: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            p: 3,
            eps_start: 0.9,
            eps_end: 0.05,
            eps_decay: 100.0,
            gamma: 0.95,
            alpha_actor: 0.001,
            alpha_critic: 0.001,
            m: 5,
            hidden: 64,
            embed_dim: 16,
            update: UpdateRule::ActorCritic,
            optimizer: Optimizer::Sgd,
            window: 10,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        if self.p > 20 {
            return bad("p must be ≤ 20 so that 2^p fits an edge weight");
        }
        if !(self.eps_start >= self.eps_end && self.eps_end >= 0.0 && self.eps_start <= 1.0) {
            return bad("need 1 ≥ eps_start ≥ eps_end ≥ 0");
        }
        if self.eps_decay.is_nan() || self.eps_decay <= 0.0 {
            return bad("eps_decay must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.alpha_actor >= 0.0 && self.alpha_critic >= 0.0) {
            return bad("step sizes must be non-negative");
        }
        if self.hidden == 0 || self.window == 0 {
            return bad("hidden and window must be ≥ 1");
        }
        Ok(())
    }
}

/// `ε_end + (ε_start − ε_end) · exp(−t / ε_decay)`.
pub fn epsilon(t: usize, start: f64, end: f64, decay: f64) -> Result<f64> {
    if decay.is_nan() || decay <= 0.0 {
        return Err(Error::InvalidParam(format!("eps_decay {decay} must be positive")));
    }
    Ok(end + (start - end) * (-(t as f64) / decay).exp())
}

/// Edge weight of an action index.
pub fn action_weight(a: usize) -> u32 {
    1u32 << a
}

/// Windowed discounted returns `G_t = Σ_{j=t}^{min(t+W, T)−1} γ^{j−t} r_j`.
pub fn returns(rewards: &[f64], gamma: f64, window: usize) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            rewards[t..(t + window).min(rewards.len())]
                .iter()
                .rev()
                .fold(0.0, |acc, r| r + gamma * acc)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionMode {
    /// Sample from the actor softmax (ε-greedy exploration on top).
    Sample,
    /// Take the most probable action; ε is ignored.
    Greedy,
}

/// Diagnostics of one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateInfo {
    pub delta: f64,
    pub value: f64,
    pub next_value: f64,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyModel {
    pub actor: Mlp,
    pub critic: Mlp,
    pub cfg: PolicyConfig,
    actor_adam: Option<AdamState>,
    critic_adam: Option<AdamState>,
}

impl PolicyModel {
    pub fn new(state_dim: usize, cfg: PolicyConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let actor = Mlp::new(state_dim, cfg.hidden, cfg.p + 1, rng);
        let critic = Mlp::new(state_dim, cfg.hidden, 1, rng);
        Ok(Self::from_parts(actor, critic, cfg))
    }

    pub fn from_parts(actor: Mlp, critic: Mlp, cfg: PolicyConfig) -> Self {
        let (actor_adam, critic_adam) = match cfg.optimizer {
            Optimizer::Adam => (
                Some(AdamState::new(&actor.params())),
                Some(AdamState::new(&critic.params())),
            ),
            Optimizer::Sgd => (None, None),
        };
        PolicyModel {
            actor,
            critic,
            cfg,
            actor_adam,
            critic_adam,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.cfg.p + 1
    }

    /// Row-wise softmax over the actor logits.
    pub fn action_probs(&self, states: &DenseMatrix) -> Result<DenseMatrix> {
        let (logits, _) = self.actor.forward(states)?;
        Ok(softmax_rows(&logits))
    }

    /// Per edge: with probability `ε` a uniform action, otherwise a draw from
    /// the actor (or its argmax in greedy mode). Random numbers are consumed
    /// in edge order.
    pub fn select_actions(
        &self,
        states: &DenseMatrix,
        eps: f64,
        mode: ActionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParam(format!("epsilon {eps} not in [0, 1]")));
        }
        let probs = self.action_probs(states)?;
        let na = self.num_actions();
        let mut actions = Vec::with_capacity(states.rows());
        for e in 0..states.rows() {
            let row = probs.row(e);
            let a = match mode {
                ActionMode::Greedy => crate::nn::argmax(row),
                ActionMode::Sample => {
                    if rng.gen::<f64>() < eps {
                        rng.gen_range(0..na)
                    } else {
                        sample_row(row, rng.gen::<f64>())
                    }
                }
            };
            actions.push(a);
        }
        Ok(actions)
    }

    /// State value: mean of the per-edge critic outputs.
    pub fn critic_value(&self, states: &DenseMatrix) -> Result<f64> {
        if states.rows() == 0 {
            return Err(Error::InvalidParam("critic needs at least one edge".into()));
        }
        let (out, _) = self.critic.forward(states)?;
        Ok(out.as_slice().iter().sum::<f64>() / states.rows() as f64)
    }

    /// Gradient of `critic_value` with respect to the critic parameters.
    pub fn critic_grad(&self, states: &DenseMatrix) -> Result<(f64, Vec<DenseMatrix>)> {
        let (out, cache) = self.critic.forward(states)?;
        let e = states.rows() as f64;
        let dout = DenseMatrix::from_fn(states.rows(), 1, |_, _| 1.0 / e);
        let value = out.as_slice().iter().sum::<f64>() / e;
        Ok((value, self.critic.backward(states, &cache, &dout)?))
    }

    /// Mean per-edge log-probability of `actions` and its gradient with
    /// respect to the actor parameters.
    pub fn log_prob_grad(
        &self,
        states: &DenseMatrix,
        actions: &[usize],
    ) -> Result<(f64, Vec<DenseMatrix>)> {
        if actions.len() != states.rows() || actions.is_empty() {
            return Err(Error::Dimension(format!(
                "{} actions for {} states",
                actions.len(),
                states.rows()
            )));
        }
        let na = self.num_actions();
        if let Some(&a) = actions.iter().find(|&&a| a >= na) {
            return Err(Error::InvalidParam(format!("action {a} outside 0..{na}")));
        }
        let (logits, cache) = self.actor.forward(states)?;
        let probs = softmax_rows(&logits);
        let e = actions.len() as f64;
        let mut logp = 0.0;
        let mut dout = DenseMatrix::zeros(logits.rows(), na);
        for (r, &a) in actions.iter().enumerate() {
            logp += probs.get(r, a).max(1e-300).ln();
            for c in 0..na {
                let hit = if c == a { 1.0 } else { 0.0 };
                dout.set(r, c, (hit - probs.get(r, c)) / e);
            }
        }
        Ok((logp / e, self.actor.backward(states, &cache, &dout)?))
    }

    fn ascend_actor(&mut self, grads: &[DenseMatrix], coef: f64) -> Result<()> {
        ascend(&mut self.actor, self.actor_adam.as_mut(), grads, coef, self.cfg.alpha_actor)
    }

    fn ascend_critic(&mut self, grads: &[DenseMatrix], coef: f64) -> Result<()> {
        ascend(&mut self.critic, self.critic_adam.as_mut(), grads, coef, self.cfg.alpha_critic)
    }

    /// One actor-critic step with TD error `δ = r + γ v̂(s') − v̂(s)`.
    pub fn actor_critic_update(
        &mut self,
        states: &DenseMatrix,
        actions: &[usize],
        reward: f64,
        next_states: &DenseMatrix,
    ) -> Result<UpdateInfo> {
        let next_value = self.critic_value(next_states)?;
        let (value, critic_grads) = self.critic_grad(states)?;
        let (_, actor_grads) = self.log_prob_grad(states, actions)?;
        let delta = reward + self.cfg.gamma * next_value - value;
        let finite = delta.is_finite()
            && critic_grads.iter().all(|g| g.is_finite())
            && actor_grads.iter().all(|g| g.is_finite());
        if !finite {
            log::warn!("non-finite actor-critic update skipped");
            return Ok(UpdateInfo {
                delta,
                value,
                next_value,
                skipped: true,
            });
        }
        self.ascend_critic(&critic_grads, delta)?;
        self.ascend_actor(&actor_grads, delta)?;
        Ok(UpdateInfo {
            delta,
            value,
            next_value,
            skipped: false,
        })
    }

    /// One REINFORCE step `θ ← θ + α G ∇ ln π(a | s)`.
    pub fn reinforce_update(
        &mut self,
        states: &DenseMatrix,
        actions: &[usize],
        ret: f64,
    ) -> Result<UpdateInfo> {
        let (_, grads) = self.log_prob_grad(states, actions)?;
        let skipped = !ret.is_finite() || grads.iter().any(|g| !g.is_finite());
        if skipped {
            log::warn!("non-finite reinforce update skipped");
        } else if ret != 0.0 {
            self.ascend_actor(&grads, ret)?;
        }
        Ok(UpdateInfo {
            delta: ret,
            value: 0.0,
            next_value: 0.0,
            skipped,
        })
    }

    /// Tags: `p, m, input, hidden, optimizer`; tensors: actor then critic.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        let tags = [
            self.cfg.p as u32,
            self.cfg.m as u32,
            self.actor.input_dim() as u32,
            self.cfg.hidden as u32,
            (self.cfg.optimizer == Optimizer::Adam) as u32,
        ];
        let tensors: Vec<&DenseMatrix> = self
            .actor
            .params()
            .into_iter()
            .chain(self.critic.params())
            .collect();
        write_tensors(w, POLICY_MAGIC, &tags, &tensors)
    }

    /// Loads weights saved by [`PolicyModel::save`]; `cfg` supplies the
    /// hyperparameters and must agree with the stored shapes.
    pub fn load(r: &mut impl Read, cfg: PolicyConfig) -> Result<Self> {
        let (tags, t) = read_tensors(r, POLICY_MAGIC)?;
        if tags.len() != 5 || t.len() != 8 {
            return Err(Error::Checkpoint("policy header has wrong arity".into()));
        }
        if tags[0] as usize != cfg.p || tags[1] as usize != cfg.m || tags[3] as usize != cfg.hidden {
            return Err(Error::Checkpoint(format!(
                "checkpoint has p={}, m={}, hidden={}",
                tags[0], tags[1], tags[3]
            )));
        }
        let mut it = t.into_iter();
        let mut mlp = || Mlp {
            w1: it.next().unwrap(),
            b1: it.next().unwrap(),
            w2: it.next().unwrap(),
            b2: it.next().unwrap(),
        };
        let actor = mlp();
        let critic = mlp();
        if actor.input_dim() != tags[2] as usize || actor.output_dim() != cfg.p + 1 {
            return Err(Error::Checkpoint("actor shape mismatch".into()));
        }
        Ok(Self::from_parts(actor, critic, cfg))
    }
}

fn ascend(
    net: &mut Mlp,
    adam: Option<&mut AdamState>,
    grads: &[DenseMatrix],
    coef: f64,
    alpha: f64,
) -> Result<()> {
    match adam {
        None => sgd_step(&mut net.params_mut(), grads, alpha * coef),
        Some(state) => {
            if alpha == 0.0 || coef == 0.0 {
                return Ok(());
            }
            let neg: Vec<DenseMatrix> = grads
                .iter()
                .map(|g| {
                    let mut g = g.clone();
                    g.scale(-coef);
                    g
                })
                .collect();
            adam_step(&mut net.params_mut(), &neg, state, alpha)
        }
    }
}

fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        softmax_row(logits.row(r), out.row_mut(r));
    }
    out
}

/// Inverse-CDF draw from a probability row given `u ∈ [0, 1)`.
fn sample_row(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1
}
