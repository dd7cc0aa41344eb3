//! CSV/JSON graph files: `src,dst` edges, headerless feature rows,
//! `node,label` labels and a `{"labeled": [..], "targets": [..]}` split file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Adjacency, AttributedGraph, GraphView};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

impl GraphPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        GraphPaths {
            edges: dir.join("edges.csv"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.csv"),
            splits: dir.join("splits.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub labeled: Vec<usize>,
    pub targets: Vec<usize>,
    /// Only needed when the highest class id has no node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn io(p: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(p, e)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn records(path: &Path, has_headers: bool) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = reader(path, has_headers)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_pair(path: &Path, line: usize, fields: &[String]) -> Result<(usize, usize)> {
    if fields.len() != 2 {
        return Err(parse_err(
            path,
            line,
            format!("expected 2 fields, found {}", fields.len()),
        ));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| parse_err(path, line, format!("`{s}`: {e}")))
    };
    Ok((parse(&fields[0])?, parse(&fields[1])?))
}

fn read_features<T: Scalar>(path: &Path) -> Result<Array2<T>> {
    let rows = records(path, false)?;
    let width = rows.first().map_or(0, |(_, r)| r.len());
    let mut data = Vec::with_capacity(rows.len() * width);
    for (line, fields) in &rows {
        if fields.len() != width {
            return Err(Error::Dimension(format!(
                "{}:{line}: {} features, expected {width}",
                path.display(),
                fields.len()
            )));
        }
        for f in fields {
            let v: T = f
                .parse()
                .map_err(|_| parse_err(path, *line, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, format!("non-finite feature `{f}`")));
            }
            data.push(v);
        }
    }
    Ok(Array2::from_shape_vec((rows.len(), width), data).expect("row widths checked"))
}

/// Reads and validates a graph. Edges are symmetrized and deduplicated;
/// self-loops are dropped and recorded in [`AttributedGraph::warnings`].
pub fn load_graph<T: Scalar>(paths: &GraphPaths) -> Result<AttributedGraph<T>> {
    let features = read_features::<T>(&paths.features)?;
    let n = features.nrows();

    let mut edges = Vec::new();
    for (line, fields) in records(&paths.edges, true)? {
        let (u, v) = parse_pair(&paths.edges, line, &fields)?;
        if u >= n || v >= n {
            return Err(Error::Validation(format!(
                "{}:{line}: edge ({u}, {v}) outside [0, {n})",
                paths.edges.display()
            )));
        }
        edges.push((u, v));
    }
    let (adjacency, cleanup) = Adjacency::from_edges(n, edges)?;
    let mut warnings = Vec::new();
    if !cleanup.self_loops.is_empty() {
        warnings.push(format!(
            "dropped {} self-loop(s) at nodes {:?}",
            cleanup.self_loops.len(),
            cleanup.self_loops
        ));
    }
    if cleanup.duplicates > 0 {
        warnings.push(format!("merged {} duplicate edge(s)", cleanup.duplicates));
    }
    for w in &warnings {
        log::warn!("{}: {w}", paths.edges.display());
    }

    let mut labels = vec![None; n];
    for (line, fields) in records(&paths.labels, true)? {
        let (u, y) = parse_pair(&paths.labels, line, &fields)?;
        if u >= n {
            return Err(Error::Validation(format!(
                "{}:{line}: label for node {u} outside [0, {n})",
                paths.labels.display()
            )));
        }
        if labels[u].replace(y).is_some() {
            return Err(Error::Validation(format!(
                "{}:{line}: node {u} labeled twice",
                paths.labels.display()
            )));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(u, y)| y.ok_or_else(|| Error::Validation(format!("node {u} has no label"))))
        .collect::<Result<Vec<_>>>()?;

    let file = File::open(&paths.splits).map_err(|e| Error::io(&paths.splits, e))?;
    let splits: Splits = serde_json::from_reader(std::io::BufReader::new(file))?;
    let observed = labels.iter().max().map_or(0, |&y| y + 1);
    let n_classes = splits.n_classes.unwrap_or(observed);

    let view = GraphView::new(adjacency, features)?;
    Ok(AttributedGraph::new(view, labels, n_classes, splits.labeled, splits.targets)?
        .with_warnings(warnings))
}

/// Writes `g` in the formats [`load_graph`] reads. Features use the
/// shortest decimal form that parses back to the same value.
pub fn save_graph<T: Scalar>(g: &AttributedGraph<T>, paths: &GraphPaths) -> Result<()> {
    for p in [&paths.edges, &paths.features, &paths.labels, &paths.splits] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let create = |p: &Path| -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?))
    };

    let mut w = create(&paths.edges)?;
    writeln!(w, "src,dst").map_err(io(&paths.edges))?;
    for &(u, v) in g.adjacency().edges() {
        writeln!(w, "{u},{v}").map_err(io(&paths.edges))?;
    }
    w.flush().map_err(io(&paths.edges))?;

    let mut w = create(&paths.features)?;
    for row in g.features().rows() {
        let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "{line}").map_err(io(&paths.features))?;
    }
    w.flush().map_err(io(&paths.features))?;

    let mut w = create(&paths.labels)?;
    writeln!(w, "node,label").map_err(io(&paths.labels))?;
    for (u, y) in g.labels().iter().enumerate() {
        writeln!(w, "{u},{y}").map_err(io(&paths.labels))?;
    }
    w.flush().map_err(io(&paths.labels))?;

    let observed = g.labels().iter().max().map_or(0, |&y| y + 1);
    let splits = Splits {
        labeled: g.labeled_set().to_vec(),
        targets: g.target_set().to_vec(),
        n_classes: (observed != g.n_classes()).then_some(g.n_classes()),
    };
    let mut w = create(&paths.splits)?;
    serde_json::to_writer(&mut w, &splits)?;
    w.flush().map_err(io(&paths.splits))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, edges: &str, features: &str, labels: &str, splits: &str) -> GraphPaths {
        let p = GraphPaths::in_dir(dir);
        std::fs::write(&p.edges, edges).unwrap();
        std::fs::write(&p.features, features).unwrap();
        std::fs::write(&p.labels, labels).unwrap();
        std::fs::write(&p.splits, splits).unwrap();
        p
    }

    const FEATS: &str = "0.5,1\n-1,2\n3,0.25\n";
    const LABELS: &str = "node,label\n0,0\n1,1\n2,0\n";
    const SPLITS: &str = r#"{"labeled": [0, 1], "targets": [2]}"#;

    #[test]
    fn triangle_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "src,dst\n0,1\n1,2\n0,2\n", FEATS, LABELS, SPLITS);
        let g = load_graph::<f64>(&p).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 3);
        assert_eq!(g.n_classes(), 2);
        assert_eq!(g.n_features(), 2);
        assert!(g.warnings().is_empty());
    }

    #[test]
    fn duplicate_edges_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "src,dst\n0,1\n0,1\n1,2\n2,0\n", FEATS, LABELS, SPLITS);
        let g = load_graph::<f64>(&p).unwrap();
        assert_eq!(g.n_edges(), 3);
    }

    #[test]
    fn self_loop_dropped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "src,dst\n0,0\n0,1\n", FEATS, LABELS, SPLITS);
        let g = load_graph::<f64>(&p).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.warnings().len(), 1);
        assert!(g.warnings()[0].contains("self-loop"));
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "src,dst\n0,1\n1,x\n", FEATS, LABELS, SPLITS);
        match load_graph::<f64>(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn label_node_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "src,dst\n0,1\n", FEATS, "node,label\n0,0\n1,1\n2,0\n7,1\n", SPLITS);
        assert!(matches!(load_graph::<f64>(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn label_above_declared_class_count() {
        let dir = tempfile::tempdir().unwrap();
        let splits = r#"{"labeled": [0], "targets": [2], "n_classes": 1}"#;
        let p = write(dir.path(), "src,dst\n0,1\n", FEATS, LABELS, splits);
        assert!(matches!(load_graph::<f64>(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn ragged_features_are_a_dimension_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "src,dst\n0,1\n", "1,2\n3\n4,5\n", LABELS, SPLITS);
        assert!(matches!(load_graph::<f64>(&p), Err(Error::Dimension(_))));
    }
}
