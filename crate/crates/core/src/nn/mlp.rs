//! Two-layer perceptron, `relu(x W₁ + b₁) W₂ + b₂`, evaluated row-wise.

use rand::Rng;

use super::init::glorot_uniform;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    hidden_pre: DenseMatrix,
    hidden: DenseMatrix,
}

impl Mlp {
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            w1: glorot_uniform(input, hidden, rng),
            b1: DenseMatrix::zeros(1, hidden),
            w2: glorot_uniform(hidden, output, rng),
            b2: DenseMatrix::zeros(1, output),
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            w1: DenseMatrix::zeros(input, hidden),
            b1: DenseMatrix::zeros(1, hidden),
            w2: DenseMatrix::zeros(hidden, output),
            b2: DenseMatrix::zeros(1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn params(&self) -> Vec<&DenseMatrix> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> Vec<&mut DenseMatrix> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// Forward pass over a batch of rows.
    pub fn forward(&self, x: &DenseMatrix) -> Result<(DenseMatrix, MlpCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "mlp expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut hidden_pre = x.matmul(&self.w1)?;
        add_bias(&mut hidden_pre, &self.b1);
        let mut hidden = hidden_pre.clone();
        hidden
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = v.max(0.0));
        let mut out = hidden.matmul(&self.w2)?;
        add_bias(&mut out, &self.b2);
        Ok((out, MlpCache { hidden_pre, hidden }))
    }

    /// Gradients of a scalar objective given `dout = ∂obj/∂out`.
    pub fn backward(
        &self,
        x: &DenseMatrix,
        cache: &MlpCache,
        dout: &DenseMatrix,
    ) -> Result<Vec<DenseMatrix>> {
        let dw2 = cache.hidden.t_matmul(dout)?;
        let db2 = column_sums(dout);
        let mut dh = dout.matmul_t(&self.w2)?;
        dh.as_mut_slice()
            .iter_mut()
            .zip(cache.hidden_pre.as_slice())
            .for_each(|(g, &p)| {
                if p <= 0.0 {
                    *g = 0.0
                }
            });
        let dw1 = x.t_matmul(&dh)?;
        let db1 = column_sums(&dh);
        Ok(vec![dw1, db1, dw2, db2])
    }
}

fn add_bias(m: &mut DenseMatrix, bias: &DenseMatrix) {
    let b = bias.row(0).to_vec();
    for r in 0..m.rows() {
        m.row_mut(r).iter_mut().zip(&b).for_each(|(v, bb)| *v += bb);
    }
}

fn column_sums(m: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(1, m.cols());
    for r in 0..m.rows() {
        out.row_mut(0)
            .iter_mut()
            .zip(m.row(r))
            .for_each(|(o, v)| *o += v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gcn::{apply_head, Head};

    #[test]
    fn zero_network_gives_uniform_softmax() {
        let mlp = Mlp::zeros(5, 4, 3);
        let x = DenseMatrix::from_fn(2, 5, |r, c| (r + c) as f64);
        let (out, _) = mlp.forward(&x).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
        let p = apply_head(Head::Softmax, &out);
        assert!(p.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let mlp = Mlp::zeros(5, 4, 3);
        assert!(mlp.forward(&DenseMatrix::zeros(1, 4)).is_err());
    }
}
