use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LfrParams, TaskKind};
use crate::nn::ModelKind;
use crate::partition::PartitionOptions;
use crate::policy::PolicyConfig;
use crate::seed;
use crate::trainer::TrainerConfig;

/// Where a dataset lives and how to split it when no split file exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dir: PathBuf,
    pub task: TaskKind,
    pub edges: String,
    pub labels: String,
    /// Feature CSV; when missing, SVD features of width `svd_dim` are used.
    pub features: String,
    pub splits: String,
    pub svd_dim: usize,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data"),
            task: TaskKind::Multiclass,
            edges: "edges.tsv".into(),
            labels: "labels.csv".into(),
            features: "features.csv".into(),
            splits: "splits.tsv".into(),
            svd_dim: 16,
            train_frac: 0.6,
            val_frac: 0.1,
        }
    }
}

impl DataConfig {
    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    /// Number of search steps.
    #[serde(rename = "T")]
    pub t: usize,
    pub k: usize,
    pub bsize: usize,
    /// Inner ClusterGCN epochs per step.
    pub iters: usize,
    pub lr: f64,
    pub hidden: usize,
    pub dropout: f64,
    pub model: ModelKind,
    pub final_epochs: usize,
    /// Carry the GCN across steps instead of re-initialising it.
    pub warm_start: bool,
    /// Record real step durations in `metrics.csv` (otherwise 0, so that
    /// reruns are byte-identical).
    pub wall_clock: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            t: 200,
            k: 8,
            bsize: 1,
            iters: 50,
            lr: 0.01,
            hidden: 128,
            dropout: 0.0,
            model: ModelKind::Gcn,
            final_epochs: 1500,
            warm_start: false,
            wall_clock: false,
        }
    }
}

impl SearchParams {
    pub fn trainer(&self, epochs: usize) -> TrainerConfig {
        TrainerConfig {
            model: self.model,
            hidden: self.hidden,
            iters: epochs,
            lr: self.lr,
            dropout: self.dropout,
            bsize: self.bsize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub partition: u64,
    pub gcn_init: u64,
    pub policy_init: u64,
    pub exploration: u64,
    pub split: u64,
    pub svd: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::from_master(0)
    }
}

impl Seeds {
    /// Every module seed derived from one master seed. Seeds keep 63 bits
    /// so they survive a round trip through TOML integers.
    pub fn from_master(master: u64) -> Self {
        let d = |i| seed::derive(master, i) >> 1;
        Seeds {
            partition: d(1),
            gcn_init: d(2),
            policy_init: d(3),
            exploration: d(4),
            split: d(5),
            svd: d(6),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub data: DataConfig,
    pub lfr: LfrParams,
    pub search: SearchParams,
    pub policy: PolicyConfig,
    pub partition: PartitionOptions,
    pub seeds: Seeds,
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl SearchConfig {
    /// Reads an optional config file, applies `section.key=value`
    /// overrides, then an optional master seed.
    pub fn resolve(path: Option<&Path>, overrides: &[String], master_seed: Option<u64>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
            let (section, field) = key.trim().split_once('.').ok_or_else(|| {
                Error::Config(format!("override key {key:?} must be section.field"))
            })?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(Error::Config(format!("{section} is not a section")));
            };
            sec.insert(field.to_string(), parse_value(raw.trim()));
        }
        let mut cfg: SearchConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(m) = master_seed {
            cfg.seeds = Seeds::from_master(m);
            cfg.lfr.seed = seed::derive(m, 0) >> 1;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.search;
        if s.t == 0 {
            return Err(Error::Config("search.T must be ≥ 1".into()));
        }
        if s.k == 0 || s.bsize == 0 || s.bsize > s.k {
            return Err(Error::Config(format!(
                "need 1 ≤ bsize ≤ k, got bsize={} k={}",
                s.bsize, s.k
            )));
        }
        if s.iters == 0 || s.final_epochs == 0 {
            return Err(Error::Config("iters and final_epochs must be ≥ 1".into()));
        }
        self.policy.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_round_trip() {
        let sets = vec![
            "search.T=3".to_string(),
            "lfr.mu=0.25".to_string(),
            "data.dir=some/where".to_string(),
            "policy.update=reinforce".to_string(),
        ];
        let cfg = SearchConfig::resolve(None, &sets, None).unwrap();
        assert_eq!(cfg.search.t, 3);
        assert_eq!(cfg.lfr.mu, 0.25);
        assert_eq!(cfg.data.dir, PathBuf::from("some/where"));
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("T = 3"));
        let back: SearchConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SearchConfig::resolve(None, &["search.bogus=1".into()], None).is_err());
        assert!(SearchConfig::resolve(None, &["nosection=1".into()], None).is_err());
        assert!(SearchConfig::resolve(None, &["search.k=0".into()], None).is_err());
    }

    #[test]
    fn master_seed_overrides_all() {
        let a = SearchConfig::resolve(None, &[], Some(7)).unwrap();
        let b = SearchConfig::resolve(None, &[], Some(8)).unwrap();
        assert_ne!(a.seeds.partition, b.seeds.partition);
        assert_ne!(a.seeds.partition, a.seeds.gcn_init);
        assert_ne!(a.lfr.seed, b.lfr.seed);
    }
}
