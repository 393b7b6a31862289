//! Plain-text graph and feature formats.
//!
//! Edge list: one `i j w` record per line, 0-based ids. Label file: one `i c`
//! record per line. Blank lines and lines starting with `#` are skipped.
//! Feature file: CSV whose last column is the class label.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{Graph, GraphBuilder, LabeledGraph};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Yields `(line_number, trimmed_line)` for every non-blank, non-comment line.
fn records(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((idx + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_node(path: &Path, line: usize, tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(path, line, format!("invalid node id `{tok}`")))
}

fn parse_real(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

struct RawEdge {
    line: usize,
    i: usize,
    j: usize,
    w: f64,
}

fn read_edges(path: &Path) -> Result<Vec<RawEdge>> {
    let mut edges = Vec::new();
    for (line, text) in records(path)? {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected `i j w`, found {} fields", toks.len()),
            ));
        }
        edges.push(RawEdge {
            line,
            i: parse_node(path, line, toks[0])?,
            j: parse_node(path, line, toks[1])?,
            w: parse_real(path, line, toks[2])?,
        });
    }
    Ok(edges)
}

fn read_label_records(path: &Path) -> Result<Vec<(usize, usize, usize)>> {
    let mut out = Vec::new();
    for (line, text) in records(path)? {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected `i c`, found {} fields", toks.len()),
            ));
        }
        let node = parse_node(path, line, toks[0])?;
        let class = toks[1]
            .parse::<usize>()
            .map_err(|_| parse_err(path, line, format!("invalid class id `{}`", toks[1])))?;
        out.push((line, node, class));
    }
    Ok(out)
}

fn assemble(path: &Path, n: usize, edges: &[RawEdge]) -> Result<Graph> {
    let mut builder = GraphBuilder::new(n);
    for e in edges {
        builder.add_edge(e.i, e.j, e.w).map_err(|err| match err {
            Error::ConflictingWeight { .. } | Error::InvalidConfig(_) => {
                parse_err(path, e.line, err.to_string())
            }
            other => other,
        })?;
    }
    Ok(builder.build())
}

/// Loads an edge list; the node count is one past the largest id seen.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let edges = read_edges(path)?;
    let n = edges.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0);
    assemble(path, n, &edges)
}

/// Loads a label file for a graph with `n` nodes. Every node must be labeled
/// exactly once.
pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (line, node, class) in read_label_records(path)? {
        if node >= n {
            return Err(parse_err(
                path,
                line,
                format!("node {node} out of range for {n} nodes"),
            ));
        }
        if labels[node]
            .replace(class)
            .is_some_and(|prev| prev != class)
        {
            return Err(parse_err(path, line, format!("node {node} labeled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or(Error::MissingLabel(i)))
        .collect()
}

/// Loads an edge list together with its label file. The number of classes is
/// one past the largest class id.
pub fn load_labeled_graph(
    edges: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<LabeledGraph> {
    let edges_path = edges.as_ref();
    let labels_path = labels.as_ref();
    let raw_edges = read_edges(edges_path)?;
    let raw_labels = read_label_records(labels_path)?;
    let n = raw_edges
        .iter()
        .map(|e| e.i.max(e.j) + 1)
        .chain(raw_labels.iter().map(|&(_, node, _)| node + 1))
        .max()
        .unwrap_or(0);
    let graph = assemble(edges_path, n, &raw_edges)?;
    let labels = load_labels(labels_path, n)?;
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    LabeledGraph::new(graph, labels, num_classes)
}

pub fn save_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (i, j, w) in graph.edges() {
        writeln!(out, "{i} {j} {w}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn save_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (i, c) in labels.iter().enumerate() {
        writeln!(out, "{i} {c}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Loads a feature CSV. The last column holds the class label; labels are
/// mapped to `0..C` in sorted order (numerically when every label is an
/// integer). A first line whose feature fields do not parse is treated as a
/// header.
pub fn load_features(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, Vec<usize>, usize)> {
    let path = path.as_ref();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = None;
    for (pos, (line, text)) in records(path)?.into_iter().enumerate() {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(parse_err(
                path,
                line,
                "need at least one feature and a label",
            ));
        }
        let (label, feats) = fields.split_last().expect("nonempty");
        let parsed: std::result::Result<Vec<f64>, _> =
            feats.iter().map(|t| t.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if pos == 0 => continue,
            Err(_) => return Err(parse_err(path, line, "invalid feature value")),
        };
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(
                path,
                line,
                format!("non-finite feature in column {}", bad + 1),
            ));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {w} features, found {}", values.len()),
                ))
            }
            _ => {}
        }
        rows.push(values);
        raw_labels.push(label.to_string());
    }
    let d = width.ok_or_else(|| parse_err(path, 0, "no data rows"))?;

    let all_integer = raw_labels.iter().all(|l| l.parse::<i64>().is_ok());
    let mut classes: BTreeMap<(i64, String), usize> = BTreeMap::new();
    for l in &raw_labels {
        let key = (if all_integer { l.parse().unwrap() } else { 0 }, l.clone());
        classes.entry(key).or_insert(0);
    }
    for (idx, v) in classes.values_mut().enumerate() {
        *v = idx;
    }
    let labels = raw_labels
        .iter()
        .map(|l| {
            let key = (if all_integer { l.parse().unwrap() } else { 0 }, l.clone());
            classes[&key]
        })
        .collect();

    let n = rows.len();
    let features = DMatrix::from_fn(n, d, |r, c| rows[r][c]);
    Ok((features, labels, classes.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_connected_graph;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn three_edges_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "g.edges", "0 1 1.0\n1 2 0.5\n# comment\n2 3 2\n");
        let l = write(&dir, "g.labels", "0 0\n1 0\n2 1\n3 1\n");
        let lg = load_labeled_graph(&e, &l).unwrap();
        assert_eq!(lg.graph.num_edges(), 3);
        assert_eq!(lg.graph.num_nodes(), 4);
        assert_eq!(lg.labels(), &[0, 0, 1, 1]);
        assert_eq!(lg.graph.weight(2, 1), 0.5);
    }

    #[test]
    fn conflicting_duplicate_is_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "g.edges", "1 2 0.5\n2 1 0.7\n");
        match load_edge_list(&e) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("conflicting"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_non_finite_lines() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "a.edges", "0 1 1\n0 x 1\n");
        assert!(matches!(
            load_edge_list(&e),
            Err(Error::Parse { line: 2, .. })
        ));
        let e = write(&dir, "b.edges", "0 1 NaN\n");
        assert!(matches!(
            load_edge_list(&e),
            Err(Error::Parse { line: 1, .. })
        ));
        let e = write(&dir, "c.edges", "0 1\n");
        assert!(matches!(
            load_edge_list(&e),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            load_edge_list(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn missing_label_reported() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "g.edges", "0 1 1\n1 2 1\n");
        let l = write(&dir, "g.labels", "0 0\n2 1\n");
        assert!(matches!(
            load_labeled_graph(&e, &l),
            Err(Error::MissingLabel(1))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = random_connected_graph(30, 0.2, 77);
        let p = dir.path().join("rt.edges");
        save_edge_list(&g, &p).unwrap();
        let back = load_edge_list(&p).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn features_with_header_and_string_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "f.csv", "a,b,class\n1,2,g\n3,4,b\n5,6,g\n");
        let (x, labels, c) = load_features(&p).unwrap();
        assert_eq!(x.shape(), (3, 2));
        assert_eq!(c, 2);
        assert_eq!(labels, vec![1, 0, 1]);
        let p = write(&dir, "n.csv", "1,2,10\n3,4,-1\n5,6,2\n");
        let (_, labels, c) = load_features(&p).unwrap();
        assert_eq!(c, 3);
        assert_eq!(labels, vec![2, 0, 1]);
        let p = write(&dir, "bad.csv", "1,2,0\n3,inf,1\n");
        assert!(matches!(
            load_features(&p),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
