use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Moment estimates for the Adam optimiser.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[&DenseMatrix]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| vec![0.0; p.as_slice().len()])
                .collect()
        };
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update, descending `grads`.
pub fn adam_step(
    params: &mut [&mut DenseMatrix],
    grads: &[DenseMatrix],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "{} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || m.len() != g.as_slice().len() {
            return Err(Error::Dimension("parameter/gradient shape".into()));
        }
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (w, &gj)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            *w -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

/// Plain gradient step `p ← p + scale · g`.
pub fn sgd_step(params: &mut [&mut DenseMatrix], grads: &[DenseMatrix], scale: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension("parameter/gradient count".into()));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Dimension("parameter/gradient shape".into()));
        }
        p.as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .for_each(|(w, d)| *w += scale * d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = DenseMatrix::from_vec(1, 3, vec![1.0, -2.0, 3.0]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&[&p]);
        adam_step(&mut [&mut p], &[DenseMatrix::zeros(1, 3)], &mut st, 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_on_square_moves_by_lr() {
        // f(x) = x², x = 1 → g = 2; m̂ = g and v̂ = g² so the step is lr·sign(g).
        let mut x = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut st = AdamState::new(&[&x]);
        let g = DenseMatrix::from_vec(1, 1, vec![2.0 * x.get(0, 0)]).unwrap();
        adam_step(&mut [&mut x], &[g], &mut st, 0.1).unwrap();
        let expect = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((x.get(0, 0) - expect).abs() < 1e-15);
        assert!((x.get(0, 0) - 0.9).abs() < 1e-8);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut p = DenseMatrix::zeros(2, 2);
        let mut st = AdamState::new(&[&p]);
        assert!(adam_step(&mut [&mut p], &[DenseMatrix::zeros(1, 2)], &mut st, 0.1).is_err());
    }
}
