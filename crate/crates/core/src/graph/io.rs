//! Text formats: TAB-separated edge lists, CSV features/labels, split files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Graph, Labels, SplitMasks, TaskKind};
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

fn parse_edges(path: &Path) -> Result<Vec<(usize, usize, u32)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split('\t').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(path, lineno, "expected u<TAB>v[<TAB>w]"));
        }
        let id = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("bad node id {s:?}")))
        };
        let u = id(fields[0])?;
        let v = id(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => match s.parse::<u32>() {
                Ok(w) if w >= 1 => w,
                _ => return Err(Error::parse(path, lineno, format!("bad weight {s:?}"))),
            },
            None => 1,
        };
        edges.push((u, v, w));
    }
    Ok(edges)
}

/// Reads a `node,c0,c1,…` CSV into rows indexed by node id.
fn parse_node_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.first().map(String::as_str) != Some("node") {
        return Err(Error::parse(path, 1, "header must start with `node`"));
    }
    let width = headers.len() - 1;
    let mut rows: Vec<Option<Vec<f64>>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let lineno = i + 2;
        let rec = rec?;
        if rec.len() != width + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} fields", width + 1),
            ));
        }
        let node: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad node id {:?}", &rec[0])))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, lineno, format!("bad value {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if node >= rows.len() {
            rows.resize(node + 1, None);
        }
        if rows[node].replace(vals).is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate node {node}")));
        }
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.ok_or_else(|| Error::Dimension(format!("{}: node {i} missing", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((headers, rows))
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, cols: usize) -> Result<DenseMatrix> {
    let n = rows.len();
    DenseMatrix::from_vec(n, cols, rows.into_iter().flatten().collect())
}

fn parse_labels(path: &Path, task: TaskKind) -> Result<Labels> {
    let (headers, rows) = parse_node_csv(path)?;
    match task {
        TaskKind::Multiclass => {
            if headers.len() != 2 {
                return Err(Error::parse(
                    path,
                    1,
                    "multiclass labels need one `class` column",
                ));
            }
            let classes = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let c = r[0];
                    if c < 0.0 || c.fract() != 0.0 {
                        Err(Error::Dimension(format!(
                            "{}: node {i} has non-integer class {c}",
                            path.display()
                        )))
                    } else {
                        Ok(c as usize)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Labels::multiclass(classes))
        }
        TaskKind::Multilabel => {
            let q = headers.len() - 1;
            Labels::multilabel(rows_to_matrix(rows, q)?)
        }
    }
}

/// Loads a graph from an edge list, optional feature CSV and label CSV.
///
/// The node count is taken from the label file (and must agree with the
/// feature file when one is given). Without features the graph carries an
/// `n × 0` feature matrix.
pub fn load_graph(
    edge_list: &Path,
    features: Option<&Path>,
    labels: &Path,
    task: TaskKind,
) -> Result<Graph> {
    let edges = parse_edges(edge_list)?;
    let labels = parse_labels(labels, task)?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let features = match features {
        Some(p) => {
            let (headers, rows) = parse_node_csv(p)?;
            if rows.len() != n {
                return Err(Error::Dimension(format!(
                    "{} feature rows but {n} label rows",
                    rows.len()
                )));
            }
            rows_to_matrix(rows, headers.len() - 1)?
        }
        None => DenseMatrix::zeros(n, 0),
    };
    Graph::from_edges(n, &edges, features, labels)
}

fn write_node_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a feature matrix as CSV with header `node,f0,f1,…`.
pub fn save_features(path: &Path, f: &DenseMatrix) -> Result<()> {
    let mut header = vec!["node".to_string()];
    header.extend((0..f.cols()).map(|j| format!("f{j}")));
    write_node_csv(
        path,
        &header,
        (0..f.rows()).map(|i| {
            std::iter::once(i.to_string())
                .chain(f.row(i).iter().map(|v| v.to_string()))
                .collect()
        }),
    )
}

/// Writes the edge list (`u<TAB>v<TAB>w`, `u < v`), features and labels.
pub fn save_graph(
    g: &Graph,
    edge_list: &Path,
    features: Option<&Path>,
    labels: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(edge_list)?);
    for (&(u, v), wt) in g.edges().iter().zip(g.edge_weights()) {
        writeln!(w, "{u}\t{v}\t{wt}")?;
    }
    w.flush()?;

    if let Some(fp) = features {
        save_features(fp, g.features())?;
    }

    match g.labels() {
        Labels::Multiclass { classes, .. } => write_node_csv(
            labels,
            &["node".into(), "class".into()],
            classes
                .iter()
                .enumerate()
                .map(|(i, c)| vec![i.to_string(), c.to_string()]),
        ),
        Labels::Multilabel(m) => {
            let mut header = vec!["node".to_string()];
            header.extend((0..m.cols()).map(|j| format!("l{j}")));
            write_node_csv(
                labels,
                &header,
                (0..m.rows()).map(|i| {
                    std::iter::once(i.to_string())
                        .chain(m.row(i).iter().map(|&v| (v as u8).to_string()))
                        .collect()
                }),
            )
        }
    }
}

/// Reads `node_id<TAB>{train|val|test}` lines; unlisted nodes belong to no split.
pub fn load_splits(path: &Path, n: usize) -> Result<SplitMasks> {
    let reader = BufReader::new(File::open(path)?);
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    let mut seen = vec![false; n];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split('\t').map(str::trim);
        let (Some(id), Some(which), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, lineno, "expected node_id<TAB>split"));
        };
        let node: usize = id
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad node id {id:?}")))?;
        if node >= n {
            return Err(Error::parse(
                path,
                lineno,
                format!("node {node} out of range"),
            ));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(Error::parse(
                path,
                lineno,
                format!("node {node} listed twice"),
            ));
        }
        match which {
            "train" => train[node] = true,
            "val" => val[node] = true,
            "test" => test[node] = true,
            other => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unknown split {other:?}"),
                ))
            }
        }
    }
    SplitMasks::new(train, val, test)
}

pub fn save_splits(path: &Path, s: &SplitMasks) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..s.train.len() {
        let tag = if s.train[i] {
            "train"
        } else if s.val[i] {
            "val"
        } else if s.test[i] {
            "test"
        } else {
            continue;
        };
        writeln!(w, "{i}\t{tag}")?;
    }
    w.flush()?;
    Ok(())
}
