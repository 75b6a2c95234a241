//! Leading left singular vectors of the weighted adjacency matrix.
//!
//! `A` is symmetric, so its singular vectors are eigenvectors ordered by
//! `|λ|`. We run randomized subspace iteration on an oversampled block and
//! extract Ritz pairs from the projected matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};
use crate::nn::{CsrMatrix, DenseMatrix};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub oversample: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            tol: 1e-8,
            max_iters: 300,
            oversample: 10,
            seed: 0,
        }
    }
}

fn spmm(a: &CsrMatrix, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.n_rows(), q.ncols());
    for r in 0..a.n_rows() {
        for (c, v) in a.row(r) {
            for j in 0..q.ncols() {
                out[(r, j)] += v * q[(c, j)];
            }
        }
    }
    out
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Eigenpairs sorted by descending `|λ|`, ties broken by descending `λ`.
fn sorted_eigen(b: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        b.abs()
            .partial_cmp(&a.abs())
            .unwrap()
            .then(b.partial_cmp(&a).unwrap())
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Returns an `n × dim` matrix whose columns are the leading left singular
/// vectors of `A`, padded with zero columns when `n < dim`.
///
/// Each column is sign-normalised so its largest-magnitude entry is positive.
pub fn svd_features(g: &Graph, dim: usize, opts: SvdOptions) -> Result<DenseMatrix> {
    if dim == 0 {
        return Err(Error::InvalidParam("svd dimension must be ≥ 1".into()));
    }
    let n = g.n();
    let a = g.adjacency();
    let keep = dim.min(n);
    let block = (dim + opts.oversample).min(n);

    let (_, basis) = if block == n {
        // Small problem: the full eigendecomposition is the exact answer.
        let dense = DMatrix::from_fn(n, n, |r, c| a.get(r, c));
        sorted_eigen(dense)
    } else {
        let mut rng = seed::rng(opts.seed);
        let omega = DMatrix::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0));
        let mut q = orthonormalize(spmm(&a, &omega));
        let mut prev: Option<Vec<f64>> = None;
        let mut converged = None;
        for _ in 0..opts.max_iters {
            let aq = spmm(&a, &q);
            let b = q.transpose() * &aq;
            let b = (&b + b.transpose()) * 0.5;
            let (vals, vecs) = sorted_eigen(b);
            let scale = vals.first().map_or(0.0, |v| v.abs());
            if let Some(p) = &prev {
                let delta = vals[..keep]
                    .iter()
                    .zip(&p[..keep])
                    .map(|(x, y)| (x.abs() - y.abs()).abs())
                    .fold(0.0, f64::max);
                if delta <= opts.tol * scale {
                    converged = Some((vals, &q * vecs));
                    break;
                }
            }
            prev = Some(vals);
            q = orthonormalize(aq);
        }
        converged.ok_or(Error::NoConvergence {
            tol: opts.tol,
            iters: opts.max_iters,
        })?
    };

    let mut out = DenseMatrix::zeros(n, dim);
    for j in 0..keep {
        let col: Vec<f64> = (0..n).map(|r| basis[(r, j)]).collect();
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (r, v) in col.into_iter().enumerate() {
            out.set(r, j, sign * v);
        }
    }
    Ok(out)
}
