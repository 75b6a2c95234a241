use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Prepared, SearchConfig, SearchOutcome, SearchRecord};
use crate::error::{Error, Result};
use crate::partition::ClusterConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CLUSTERS_FILE: &str = "best_clusters.tsv";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const GCN_FILE: &str = "gcn.ckpt";
pub const CONFIG_FILE: &str = "config.resolved";

pub fn write_metrics(path: &Path, records: &[SearchRecord], p: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["step", "epsilon", "reward", "val_f1", "best"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..=p).map(|a| format!("action_hist_{a}")));
    header.push("wall_ms".into());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.step.to_string(),
            format!("{:.6}", r.epsilon),
            format!("{:.6}", r.reward),
            format!("{:.6}", r.val_f1),
            (r.best as u8).to_string(),
        ];
        row.extend(r.action_hist.iter().map(|c| c.to_string()));
        row.push(r.wall_ms.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the search artifacts into `dir`, creating it if needed. Cluster
/// assignments use node ids of the full graph.
pub fn write_run(dir: &Path, cfg: &SearchConfig, data: &Prepared, out: &SearchOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics(&dir.join(METRICS_FILE), &out.records, cfg.policy.p)?;

    let mut w = BufWriter::new(File::create(dir.join(CLUSTERS_FILE))?);
    for (local, &c) in out.best.assign.iter().enumerate() {
        writeln!(w, "{}\t{c}", data.train.nodes[local])?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(POLICY_FILE))?);
    out.policy.save(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join(GCN_FILE))?);
    out.best_model.save(&mut w)?;
    w.flush()?;

    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    Ok(())
}

/// Reads a `best_clusters.tsv` written by [`write_run`] back into a
/// configuration over the train graph.
pub fn read_assignments(path: &Path, data: &Prepared) -> Result<ClusterConfig> {
    let name = path.display().to_string();
    let local: HashMap<usize, usize> = data
        .train
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i))
        .collect();
    let mut assign = vec![usize::MAX; local.len()];
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::parse(&name, i + 1, "expected node<TAB>cluster");
        let (a, b) = line.split_once('\t').ok_or_else(bad)?;
        let node: usize = a.parse().map_err(|_| bad())?;
        let c: usize = b.parse().map_err(|_| bad())?;
        let &u = local
            .get(&node)
            .ok_or_else(|| Error::parse(&name, i + 1, format!("node {node} is not a train node")))?;
        assign[u] = c;
    }
    if assign.contains(&usize::MAX) {
        return Err(Error::parse(&name, 0, "some train nodes have no cluster"));
    }
    let k = assign.iter().max().map_or(0, |&c| c + 1);
    ClusterConfig::new(&data.train.graph, k, assign)
}
