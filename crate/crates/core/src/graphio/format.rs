//! Portable graph directory format.
//!
//! ```text
//! meta.json       {"num_nodes", "num_features", "num_classes", "name"}
//! edges.csv       header `src,dst`, one undirected edge per line, src < dst
//! features.csv    N lines of D0 comma-separated floats
//! labels.csv      N lines, one class id each
//! splits.json     {"train": [...], "val": [...], "test": [...]}
//! synthetic.json  optional, {"noise_edge_ids": [...], "params": {...}}
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::graph::{canonicalize_edges, Sanitized, SparseGraph, Splits};
use super::synth::SyntheticMeta;
use crate::error::GraphError;
use crate::numerics::Matrix;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
    name: String,
}

fn require(dir: &Path, file: &str) -> Result<PathBuf, GraphError> {
    let p = dir.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(GraphError::MissingFile(p))
    }
}

fn parse_err(file: &Path, msg: impl ToString) -> GraphError {
    GraphError::Parse {
        file: file.to_path_buf(),
        msg: msg.to_string(),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, GraphError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e))
}

fn csv_reader(path: &Path, headers: bool) -> Result<csv::Reader<fs::File>, GraphError> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e))
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<SparseGraph, GraphError> {
    load_graph_with_report(dir).map(|(g, _)| g)
}

/// Loads a graph and reports how many input edges were rewritten.
pub fn load_graph_with_report(dir: impl AsRef<Path>) -> Result<(SparseGraph, Sanitized), GraphError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(GraphError::MissingFile(dir.to_path_buf()));
    }
    let meta_path = require(dir, "meta.json")?;
    let edges_path = require(dir, "edges.csv")?;
    let feat_path = require(dir, "features.csv")?;
    let labels_path = require(dir, "labels.csv")?;
    let splits_path = require(dir, "splits.json")?;

    let meta: Meta = read_json(&meta_path)?;
    let n = meta.num_nodes;

    let mut raw_edges = Vec::new();
    let mut rdr = csv_reader(&edges_path, true)?;
    let header = rdr.headers().map_err(|e| parse_err(&edges_path, e))?.clone();
    if !header.is_empty() && (header.len() != 2 || &header[0] != "src" || &header[1] != "dst") {
        return Err(parse_err(&edges_path, format!("expected header src,dst, found {header:?}")));
    }
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(&edges_path, e))?;
        if rec.len() != 2 {
            return Err(GraphError::ShapeMismatch(format!(
                "edges.csv line {} has {} fields",
                line + 2,
                rec.len()
            )));
        }
        let a: usize = rec[0].parse().map_err(|e| parse_err(&edges_path, e))?;
        let b: usize = rec[1].parse().map_err(|e| parse_err(&edges_path, e))?;
        if a >= n || b >= n {
            return Err(GraphError::InvalidIndex(format!("edge ({a}, {b}) with {n} nodes")));
        }
        raw_edges.push((a, b));
    }
    let (edges, report) = canonicalize_edges(raw_edges);
    if report.self_loops_dropped > 0 {
        log::warn!("{}: dropped {} self-loops", dir.display(), report.self_loops_dropped);
    }
    if report.duplicates_dropped > 0 || report.reversed > 0 {
        log::info!(
            "{}: canonicalized {} reversed and {} duplicate edges",
            dir.display(),
            report.reversed,
            report.duplicates_dropped
        );
    }

    let d = meta.num_features;
    let mut values = Vec::with_capacity(n * d);
    let mut rows = 0;
    for rec in csv_reader(&feat_path, false)?.records() {
        let rec = rec.map_err(|e| parse_err(&feat_path, e))?;
        if rec.len() != d && !(d == 0 && rec.len() == 1 && rec[0].is_empty()) {
            return Err(GraphError::ShapeMismatch(format!(
                "features.csv row {rows} has {} values, expected {d}",
                rec.len()
            )));
        }
        for field in rec.iter().take(d) {
            values.push(field.parse::<f64>().map_err(|e| parse_err(&feat_path, e))?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(GraphError::ShapeMismatch(format!("features.csv has {rows} rows for {n} nodes")));
    }
    let features = Matrix::from_shape_vec((n, d), values).expect("row lengths checked");

    let mut labels = Vec::with_capacity(n);
    for rec in csv_reader(&labels_path, false)?.records() {
        let rec = rec.map_err(|e| parse_err(&labels_path, e))?;
        if rec.len() != 1 {
            return Err(GraphError::ShapeMismatch(format!("labels.csv row {} has {} fields", labels.len(), rec.len())));
        }
        labels.push(rec[0].parse::<usize>().map_err(|e| parse_err(&labels_path, e))?);
    }
    if labels.len() != n {
        return Err(GraphError::ShapeMismatch(format!("labels.csv has {} rows for {n} nodes", labels.len())));
    }

    let splits: Splits = read_json(&splits_path)?;
    let graph = SparseGraph {
        name: meta.name,
        num_nodes: n,
        num_classes: meta.num_classes,
        edges,
        features,
        labels,
        splits,
    };
    graph.validate()?;
    Ok((graph, report))
}

pub fn save_graph(graph: &SparseGraph, dir: impl AsRef<Path>) -> Result<(), GraphError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = Meta {
        num_nodes: graph.num_nodes,
        num_features: graph.num_features(),
        num_classes: graph.num_classes,
        name: graph.name.clone(),
    };
    fs::write(dir.join("meta.json"), to_json(&meta))?;

    let mut edges = String::from("src,dst\n");
    for &(u, v) in &graph.edges {
        writeln!(edges, "{u},{v}").unwrap();
    }
    fs::write(dir.join("edges.csv"), edges)?;

    let mut feats = String::new();
    for row in graph.features.rows() {
        for (k, x) in row.iter().enumerate() {
            if k > 0 {
                feats.push(',');
            }
            // `Display` for f64 is the shortest string that parses back to the same bits
            write!(feats, "{x}").unwrap();
        }
        feats.push('\n');
    }
    fs::write(dir.join("features.csv"), feats)?;

    let mut labels = String::new();
    for l in &graph.labels {
        writeln!(labels, "{l}").unwrap();
    }
    fs::write(dir.join("labels.csv"), labels)?;
    fs::write(dir.join("splits.json"), to_json(&graph.splits))?;
    Ok(())
}

pub fn save_synthetic_meta(meta: &SyntheticMeta, dir: impl AsRef<Path>) -> Result<(), GraphError> {
    fs::write(dir.as_ref().join("synthetic.json"), to_json(meta))?;
    Ok(())
}

/// Reads `synthetic.json` if the directory has one.
pub fn load_synthetic_meta(dir: impl AsRef<Path>) -> Result<Option<SyntheticMeta>, GraphError> {
    let p = dir.as_ref().join("synthetic.json");
    if !p.is_file() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}
