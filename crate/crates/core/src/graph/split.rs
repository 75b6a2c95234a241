use rand::seq::SliceRandom;

use super::Labels;
use crate::error::{Error, Result};
use crate::seed;

/// Disjoint train/validation/test node masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn new(train: Vec<bool>, val: Vec<bool>, test: Vec<bool>) -> Result<Self> {
        let n = train.len();
        if val.len() != n || test.len() != n {
            return Err(Error::Dimension("split masks differ in length".into()));
        }
        for i in 0..n {
            if (train[i] as u8 + val[i] as u8 + test[i] as u8) > 1 {
                return Err(Error::InvalidParam(format!("node {i} is in two splits")));
            }
        }
        for (name, m) in [("train", &train), ("val", &val), ("test", &test)] {
            if !m.iter().any(|&b| b) {
                return Err(Error::InvalidParam(format!("{name} split is empty")));
            }
        }
        Ok(SplitMasks { train, val, test })
    }

    /// Random split with the given train/val fractions (the rest is test).
    ///
    /// Multiclass labels are stratified: each class is split separately.
    pub fn stratified(labels: &Labels, train_frac: f64, val_frac: f64, seed: u64) -> Result<Self> {
        if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
            return Err(Error::InvalidParam(format!(
                "split fractions {train_frac}/{val_frac} leave no test nodes"
            )));
        }
        let n = labels.len();
        let groups: Vec<Vec<usize>> = match labels {
            Labels::Multiclass {
                classes,
                num_classes,
            } => {
                let mut g = vec![Vec::new(); *num_classes];
                for (i, &c) in classes.iter().enumerate() {
                    g[c].push(i);
                }
                g
            }
            Labels::Multilabel(_) => vec![(0..n).collect()],
        };
        let mut rng = seed::rng(seed);
        let mut train = vec![false; n];
        let mut val = vec![false; n];
        let mut test = vec![false; n];
        for mut group in groups {
            group.shuffle(&mut rng);
            let c = group.len();
            let n_train = ((train_frac * c as f64).round() as usize).min(c);
            let n_val = ((val_frac * c as f64).round() as usize).min(c - n_train);
            for (pos, &node) in group.iter().enumerate() {
                if pos < n_train {
                    train[node] = true;
                } else if pos < n_train + n_val {
                    val[node] = true;
                } else {
                    test[node] = true;
                }
            }
        }
        SplitMasks::new(train, val, test)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }
}
