//! Directory dataset format:
//!
//! ```text
//! edges.tsv     two integer columns per line, one undirected edge
//! features.csv  N rows × F comma-separated reals, no header
//! labels.csv    N rows, class index or -1 for unlabeled
//! meta.json     {"num_nodes": N, "num_features": F, "num_classes": C}
//! ```
//!
//! Blank lines and lines starting with `#` are ignored in the text files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
}

/// Side information gathered while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_meta(text: &str) -> Result<Meta> {
    serde_json::from_str(text).map_err(|e| Error::parse("meta.json", e.line(), e.to_string()))
}

/// Parses `edges.tsv`. Fields may be separated by tabs or spaces. Every index
/// must be below `num_nodes`.
pub fn parse_edges(text: &str, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (line, l) in content_lines(text) {
        let mut fields = l.split_whitespace();
        let mut next = |what: &str| -> Result<usize> {
            let f = fields
                .next()
                .ok_or_else(|| Error::parse("edges.tsv", line, format!("missing {what} column")))?;
            let v: usize = f
                .parse()
                .map_err(|_| Error::parse("edges.tsv", line, format!("malformed node index {f:?}")))?;
            if v >= num_nodes {
                return Err(Error::parse(
                    "edges.tsv",
                    line,
                    format!("node index {v} out of range for {num_nodes} nodes"),
                ));
            }
            Ok(v)
        };
        let u = next("source")?;
        let v = next("target")?;
        if fields.next().is_some() {
            return Err(Error::parse("edges.tsv", line, "expected exactly two columns"));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

/// Parses `features.csv` into an `N × F` matrix.
pub fn parse_features(text: &str, num_nodes: usize, num_features: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(num_nodes * num_features);
    let mut rows = 0;
    for (line, l) in content_lines(text) {
        let before = data.len();
        for f in l.split(',') {
            let f = f.trim();
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse("features.csv", line, format!("malformed number {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse("features.csv", line, format!("non-finite value {f:?}")));
            }
            data.push(v);
        }
        let got = data.len() - before;
        if got != num_features {
            return Err(Error::parse(
                "features.csv",
                line,
                format!("expected {num_features} columns, found {got}"),
            ));
        }
        rows += 1;
        if rows > num_nodes {
            return Err(Error::parse("features.csv", line, format!("more than {num_nodes} rows")));
        }
    }
    if rows != num_nodes {
        return Err(Error::parse("features.csv", rows, format!("expected {num_nodes} rows, found {rows}")));
    }
    Matrix::from_vec(num_nodes, num_features, data)
}

/// Parses `labels.csv`; `-1` marks an unlabeled node.
pub fn parse_labels(text: &str, num_nodes: usize, num_classes: usize) -> Result<Vec<Option<usize>>> {
    let mut labels = Vec::with_capacity(num_nodes);
    for (line, l) in content_lines(text) {
        let v: i64 =
            l.parse().map_err(|_| Error::parse("labels.csv", line, format!("malformed label {l:?}")))?;
        let label = match v {
            -1 => None,
            c if c >= 0 && (c as u64) < num_classes as u64 => Some(c as usize),
            c => {
                return Err(Error::parse(
                    "labels.csv",
                    line,
                    format!("label {c} outside [0, {num_classes}) and not -1"),
                ))
            }
        };
        labels.push(label);
        if labels.len() > num_nodes {
            return Err(Error::parse("labels.csv", line, format!("more than {num_nodes} rows")));
        }
    }
    if labels.len() != num_nodes {
        return Err(Error::parse(
            "labels.csv",
            labels.len(),
            format!("expected {num_nodes} rows, found {}", labels.len()),
        ));
    }
    Ok(labels)
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    fs::read_to_string(&p).map_err(|e| Error::io(p, e))
}

/// Loads a dataset directory.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<(Graph, LoadReport)> {
    let dir = dir.as_ref();
    let meta = parse_meta(&read(dir, "meta.json")?)?;
    let edges = parse_edges(&read(dir, "edges.tsv")?, meta.num_nodes)?;
    let features = parse_features(&read(dir, "features.csv")?, meta.num_nodes, meta.num_features)?;
    let labels = parse_labels(&read(dir, "labels.csv")?, meta.num_nodes, meta.num_classes)?;
    let raw = edges.len();
    let (graph, self_loops_dropped) = Graph::from_edges(features, &edges, labels, meta.num_classes)?;
    let duplicate_edges = raw - self_loops_dropped - graph.num_edges();
    Ok((graph, LoadReport { self_loops_dropped, duplicate_edges }))
}

/// Writes a graph in the directory format read by [`load_graph`].
pub fn save_graph(graph: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    let meta = Meta {
        num_nodes: graph.num_nodes(),
        num_features: graph.num_features(),
        num_classes: graph.num_classes(),
    };
    write("meta.json", serde_json::to_string_pretty(&meta)? + "\n")?;

    let mut edges = String::new();
    for (u, v) in graph.edges() {
        writeln!(edges, "{u}\t{v}").expect("writing to a String cannot fail");
    }
    write("edges.tsv", edges)?;

    let mut features = String::new();
    for row in graph.features().iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        features.push_str(&cells.join(","));
        features.push('\n');
    }
    write("features.csv", features)?;

    let mut labels = String::new();
    for l in graph.labels() {
        match l {
            Some(c) => writeln!(labels, "{c}"),
            None => writeln!(labels, "-1"),
        }
        .expect("writing to a String cannot fail");
    }
    write("labels.csv", labels)
}
