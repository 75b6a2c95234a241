//! Label entropy of clusters.

use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::Labels;
use crate::partition::ClusterConfig;

/// Binary entropy in bits, with `0 log 0 = 0`.
fn bernoulli_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Sum over labels of the entropy of each label's prevalence among `nodes`.
/// Multiclass labels count as one-hot vectors.
pub fn label_entropy(nodes: &[usize], labels: &Labels) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = nodes.len() as f64;
    Ok((0..labels.q())
        .map(|j| {
            let ones = nodes.iter().filter(|&&u| labels.value(u, j)).count();
            bernoulli_entropy(ones as f64 / n)
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub run: usize,
    pub k: usize,
    /// One entry per cluster, in cluster order.
    pub entropies: Vec<f64>,
}

impl EntropyReport {
    pub fn new(run: usize, cfg: &ClusterConfig, labels: &Labels) -> Result<Self> {
        let entropies = cfg
            .members()
            .iter()
            .map(|m| label_entropy(m, labels))
            .collect::<Result<_>>()?;
        Ok(EntropyReport {
            run,
            k: cfg.k,
            entropies,
        })
    }
}

/// One report per run, numbered from 0 in input order.
pub fn entropy_distribution(runs: &[(ClusterConfig, &Labels)]) -> Result<Vec<EntropyReport>> {
    runs.iter()
        .enumerate()
        .map(|(i, (cfg, labels))| EntropyReport::new(i, cfg, labels))
        .collect()
}

/// Writes `run,cluster,entropy` rows ordered by run, then cluster.
pub fn write_entropy_csv(w: impl Write, reports: &[EntropyReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run", "cluster", "entropy"])?;
    for r in reports {
        for (c, s) in r.entropies.iter().enumerate() {
            out.write_record([r.run.to_string(), c.to_string(), format!("{s:.12}")])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Population variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseMatrix;

    #[test]
    fn small_cases() {
        let half = Labels::multilabel(DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(label_entropy(&[0, 1], &half).unwrap(), 1.0);
        assert_eq!(label_entropy(&[0], &half).unwrap(), 0.0);

        let two = Labels::multilabel(
            DenseMatrix::from_vec(4, 2, vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(label_entropy(&[0, 1, 2, 3], &two).unwrap(), 2.0);
        assert!(label_entropy(&[], &two).is_err());
    }

    #[test]
    fn multiclass_is_one_hot() {
        let l = Labels::multiclass(vec![0, 1, 2, 2]);
        let h = label_entropy(&[0, 1, 2, 3], &l).unwrap();
        let expect = 2.0 * bernoulli_entropy(0.25) + 1.0;
        assert!((h - expect).abs() < 1e-15);
    }

    #[test]
    fn csv_rows_are_ordered() {
        let reports = vec![
            EntropyReport { run: 0, k: 2, entropies: vec![0.5, 1.0] },
            EntropyReport { run: 1, k: 2, entropies: vec![0.0, 0.25] },
        ];
        let mut buf = Vec::new();
        write_entropy_csv(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[4].starts_with("1,1,"));
    }

    #[test]
    fn variance_of_constant_is_zero() {
        assert_eq!(variance(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(variance(&[1.0, 3.0]), 1.0);
    }
}
