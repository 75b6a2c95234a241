#![allow(clippy::needless_range_loop)]

use clusterpolicy::graph::{svd_features, Graph, Labels, SvdOptions};
use clusterpolicy::nn::DenseMatrix;
use clusterpolicy::seed;
use rand::Rng;

/// Cyclic Jacobi rotations on a dense symmetric matrix. Returns eigenvalues
/// and eigenvectors as columns of a row-major `n × n` array.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn projector(cols: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for c in cols {
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] += c[i] * c[j];
            }
        }
    }
    p
}

#[test]
fn matches_dense_jacobi_oracle() {
    let n = 30;
    let dim = 4;
    let mut rng = seed::rng(77);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.2) {
                edges.push((u, v, rng.gen_range(1..5u32)));
            }
        }
    }
    let g = Graph::from_edges(n, &edges, DenseMatrix::zeros(n, 0), Labels::multiclass(vec![0; n]))
        .unwrap();
    let mut dense = vec![vec![0.0; n]; n];
    for &(u, v, w) in &edges {
        dense[u][v] = w as f64;
        dense[v][u] = w as f64;
    }

    let (vals, vecs) = jacobi_eigen(dense.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].abs().partial_cmp(&vals[i].abs()).unwrap());
    let sigma: Vec<f64> = order.iter().map(|&i| vals[i].abs()).collect();
    assert!(sigma[dim - 1] - sigma[dim] > 1e-2, "no spectral gap: {sigma:?}");
    let oracle: Vec<Vec<f64>> = order[..dim]
        .iter()
        .map(|&c| (0..n).map(|r| vecs[r][c]).collect())
        .collect();

    let columns = |opts: SvdOptions| -> Vec<Vec<f64>> {
        let u = svd_features(&g, dim, opts).unwrap();
        (0..dim).map(|c| (0..n).map(|r| u.get(r, c)).collect()).collect()
    };
    // The stopping rule watches Ritz values, so vectors carry roughly the
    // square root of the value tolerance.
    let loose = columns(SvdOptions::default());
    for (a, b) in projector(&loose, n).iter().zip(projector(&oracle, n)) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
    let ours = columns(SvdOptions {
        tol: 1e-14,
        ..SvdOptions::default()
    });
    for (a, b) in projector(&ours, n).iter().zip(projector(&oracle, n)) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    // Rank-`dim` reconstruction error equals the discarded singular mass.
    let mut err2 = 0.0;
    let p = projector(&ours, n);
    for i in 0..n {
        for j in 0..n {
            let proj: f64 = (0..n).map(|k| p[i * n + k] * dense[k][j]).sum();
            err2 += (dense[i][j] - proj).powi(2);
        }
    }
    let tail: f64 = sigma[dim..].iter().map(|s| s * s).sum();
    assert!((err2 - tail).abs() < 1e-6 * tail.max(1.0), "{err2} vs {tail}");

    for col in ours.iter().take(dim) {
        let pivot = (0..n)
            .max_by(|&a, &b| col[a].abs().partial_cmp(&col[b].abs()).unwrap())
            .unwrap();
        assert!(col[pivot] > 0.0);
    }
}
