//! Two-layer graph convolutional models with hand-written backpropagation.
//!
//! A `gcn` layer computes `act(Â Z W)`. A `hogcn` layer mixes self, one-hop
//! and two-hop propagation: `act([Z W₀ ‖ Â Z W₁ ‖ Â² Z W₂])`, so its output is
//! three times as wide as each branch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;
use super::matrix::{CsrMatrix, DenseMatrix};
use crate::error::{Error, Result};

/// Lower clamp for arguments of `ln`.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Hogcn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Gcn,
    Hogcn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Output nonlinearity turning logits into per-node probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Independent per-label sigmoid (multilabel).
    Sigmoid,
    /// Row softmax (multiclass).
    Softmax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub kind: LayerKind,
    /// One matrix for `gcn`, three (self, 1-hop, 2-hop) for `hogcn`.
    pub weights: Vec<DenseMatrix>,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new(
        kind: LayerKind,
        in_dim: usize,
        branch_out: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let branches = match kind {
            LayerKind::Gcn => 1,
            LayerKind::Hogcn => 3,
        };
        let weights = (0..branches)
            .map(|_| glorot_uniform(in_dim, branch_out, rng))
            .collect();
        GcnLayer {
            kind,
            weights,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.iter().map(|w| w.cols()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub layers: Vec<GcnLayer>,
    pub head: Head,
}

/// Per-layer intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
struct LayerCache {
    /// Inverted-dropout multipliers applied to the layer input.
    dropout: Option<Vec<f64>>,
    /// Propagated inputs, one per weight matrix.
    props: Vec<DenseMatrix>,
    pre: DenseMatrix,
}

/// Result of a forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub logits: DenseMatrix,
    pub probs: DenseMatrix,
    caches: Vec<LayerCache>,
}

/// Supervision targets for the rows of a batch.
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    /// Class id per row (softmax head).
    Classes(&'a [usize]),
    /// 0/1 matrix, one column per label (sigmoid head).
    Binary(&'a DenseMatrix),
}

impl GcnModel {
    /// Builds the default two-layer model. For `hogcn` the hidden layer is a
    /// higher-order layer of total width `3 * hidden`.
    pub fn new(
        kind: ModelKind,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        head: Head,
        rng: &mut impl Rng,
    ) -> Self {
        let first = match kind {
            ModelKind::Gcn => GcnLayer::new(LayerKind::Gcn, in_dim, hidden, Activation::Relu, rng),
            ModelKind::Hogcn => {
                GcnLayer::new(LayerKind::Hogcn, in_dim, hidden, Activation::Relu, rng)
            }
        };
        let mid = first.out_dim();
        let second = GcnLayer::new(LayerKind::Gcn, mid, out_dim, Activation::Identity, rng);
        GcnModel {
            layers: vec![first, second],
            head,
        }
    }

    pub fn params(&self) -> Vec<&DenseMatrix> {
        self.layers.iter().flat_map(|l| l.weights.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut())
            .collect()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    fn check(&self, adj: &CsrMatrix, x: &DenseMatrix) -> Result<()> {
        if adj.n_rows() != adj.n_cols() || adj.n_rows() != x.rows() {
            return Err(Error::Dimension(format!(
                "adjacency {}x{} with {} feature rows",
                adj.n_rows(),
                adj.n_cols(),
                x.rows()
            )));
        }
        let mut width = x.cols();
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::Dimension(format!(
                    "layer {i} expects {} inputs, got {width}",
                    layer.in_dim()
                )));
            }
            width = layer.out_dim();
        }
        Ok(())
    }

    /// Deterministic forward pass (no dropout).
    pub fn forward(&self, adj: &CsrMatrix, x: &DenseMatrix) -> Result<Forward> {
        self.forward_impl(adj, x, 0.0, None::<&mut rand_chacha::ChaCha8Rng>)
    }

    /// Forward pass with inverted dropout on every layer input.
    pub fn forward_train(
        &self,
        adj: &CsrMatrix,
        x: &DenseMatrix,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<Forward> {
        self.forward_impl(adj, x, dropout, Some(rng))
    }

    fn forward_impl<R: Rng>(
        &self,
        adj: &CsrMatrix,
        x: &DenseMatrix,
        dropout: f64,
        mut rng: Option<&mut R>,
    ) -> Result<Forward> {
        self.check(adj, x)?;
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidParam(format!(
                "dropout {dropout} not in [0,1)"
            )));
        }
        let mut z = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mask = match rng.as_deref_mut() {
                Some(r) if dropout > 0.0 => {
                    let keep = 1.0 - dropout;
                    let m: Vec<f64> = (0..z.as_slice().len())
                        .map(|_| {
                            if r.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    z.as_mut_slice()
                        .iter_mut()
                        .zip(&m)
                        .for_each(|(v, s)| *v *= s);
                    Some(m)
                }
                _ => None,
            };
            let props = match layer.kind {
                LayerKind::Gcn => vec![adj.spmm(&z)?],
                LayerKind::Hogcn => {
                    let one = adj.spmm(&z)?;
                    let two = adj.spmm(&one)?;
                    vec![z, one, two]
                }
            };
            let branches = props
                .iter()
                .zip(&layer.weights)
                .map(|(p, w)| p.matmul(w))
                .collect::<Result<Vec<_>>>()?;
            let pre = if branches.len() == 1 {
                branches.into_iter().next().unwrap()
            } else {
                DenseMatrix::hconcat(&branches.iter().collect::<Vec<_>>())?
            };
            let mut out = pre.clone();
            if layer.activation == Activation::Relu {
                out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            caches.push(LayerCache {
                dropout: mask,
                props,
                pre,
            });
            z = out;
        }
        let probs = apply_head(self.head, &z);
        Ok(Forward {
            logits: z,
            probs,
            caches,
        })
    }

    /// Backpropagates `dlogits` (gradient of the loss w.r.t. the output
    /// logits) and returns one gradient per weight matrix, in `params()` order.
    pub fn backward(
        &self,
        adj: &CsrMatrix,
        fwd: &Forward,
        dlogits: &DenseMatrix,
    ) -> Result<Vec<DenseMatrix>> {
        if dlogits.shape() != fwd.logits.shape() {
            return Err(Error::Dimension("dlogits shape differs from logits".into()));
        }
        let mut per_layer: Vec<Vec<DenseMatrix>> = Vec::with_capacity(self.layers.len());
        let mut dout = dlogits.clone();
        for (li, (layer, cache)) in self.layers.iter().zip(&fwd.caches).enumerate().rev() {
            let mut ds = dout;
            if layer.activation == Activation::Relu {
                ds.as_mut_slice()
                    .iter_mut()
                    .zip(cache.pre.as_slice())
                    .for_each(|(g, &p)| {
                        if p <= 0.0 {
                            *g = 0.0
                        }
                    });
            }
            let widths: Vec<usize> = layer.weights.iter().map(|w| w.cols()).collect();
            let ds_parts = if widths.len() == 1 {
                vec![ds]
            } else {
                ds.hsplit(&widths)?
            };
            let mut grads = Vec::with_capacity(widths.len());
            for (p, d) in cache.props.iter().zip(&ds_parts) {
                grads.push(p.t_matmul(d)?);
            }
            per_layer.push(grads);
            if li == 0 {
                break;
            }
            let dprops = ds_parts
                .iter()
                .zip(&layer.weights)
                .map(|(d, w)| d.matmul_t(w))
                .collect::<Result<Vec<_>>>()?;
            let mut dz = match layer.kind {
                LayerKind::Gcn => adj.spmm(&dprops[0])?,
                LayerKind::Hogcn => {
                    let mut inner = adj.spmm(&dprops[2])?;
                    inner.add_assign(&dprops[1])?;
                    let mut dz = adj.spmm(&inner)?;
                    dz.add_assign(&dprops[0])?;
                    dz
                }
            };
            if let Some(mask) = &cache.dropout {
                dz.as_mut_slice()
                    .iter_mut()
                    .zip(mask)
                    .for_each(|(g, s)| *g *= s);
            }
            dout = dz;
        }
        per_layer.reverse();
        Ok(per_layer.into_iter().flatten().collect())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax_row(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

pub fn apply_head(head: Head, logits: &DenseMatrix) -> DenseMatrix {
    let mut probs = DenseMatrix::zeros(logits.rows(), logits.cols());
    match head {
        Head::Sigmoid => probs
            .as_mut_slice()
            .iter_mut()
            .zip(logits.as_slice())
            .for_each(|(p, &l)| *p = sigmoid(l)),
        Head::Softmax => {
            for r in 0..logits.rows() {
                softmax_row(logits.row(r), probs.row_mut(r));
            }
        }
    }
    probs
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean loss over masked rows and its gradient w.r.t. the logits.
pub fn loss_from_probs(
    head: Head,
    probs: &DenseMatrix,
    targets: Targets<'_>,
    mask: &[bool],
) -> Result<(f64, DenseMatrix)> {
    if mask.len() != probs.rows() {
        return Err(Error::Dimension(
            "mask length differs from row count".into(),
        ));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::NoLabeledNodes);
    }
    let q = probs.cols();
    let mut grad = DenseMatrix::zeros(probs.rows(), q);
    let mut loss = 0.0;
    match (head, targets) {
        (Head::Softmax, Targets::Classes(classes)) => {
            if classes.len() != probs.rows() {
                return Err(Error::Dimension("class vector length".into()));
            }
            let scale = 1.0 / count as f64;
            for r in (0..probs.rows()).filter(|&r| mask[r]) {
                let y = classes[r];
                if y >= q {
                    return Err(Error::Dimension(format!("class {y} with {q} outputs")));
                }
                loss -= probs.get(r, y).max(LOG_FLOOR).ln();
                let g = grad.row_mut(r);
                for (c, gc) in g.iter_mut().enumerate() {
                    let target = if c == y { 1.0 } else { 0.0 };
                    *gc = (probs.get(r, c) - target) * scale;
                }
            }
            loss *= scale;
        }
        (Head::Sigmoid, Targets::Binary(truth)) => {
            if truth.shape() != probs.shape() {
                return Err(Error::Dimension("label matrix shape".into()));
            }
            let scale = 1.0 / (count * q) as f64;
            for r in (0..probs.rows()).filter(|&r| mask[r]) {
                for c in 0..q {
                    let p = probs.get(r, c);
                    let y = truth.get(r, c);
                    loss -= y * p.max(LOG_FLOOR).ln() + (1.0 - y) * (1.0 - p).max(LOG_FLOOR).ln();
                    grad.set(r, c, (p - y) * scale);
                }
            }
            loss *= scale;
        }
        _ => {
            return Err(Error::InvalidParam(
                "target kind does not match the output head".into(),
            ))
        }
    }
    Ok((loss, grad))
}

/// Forward pass, mean loss over masked nodes, and weight gradients.
pub fn loss_and_grad(
    model: &GcnModel,
    adj: &CsrMatrix,
    x: &DenseMatrix,
    targets: Targets<'_>,
    mask: &[bool],
) -> Result<(f64, Vec<DenseMatrix>)> {
    let fwd = model.forward(adj, x)?;
    let (loss, dlogits) = loss_from_probs(model.head, &fwd.probs, targets, mask)?;
    let grads = model.backward(adj, &fwd, &dlogits)?;
    Ok((loss, grads))
}
