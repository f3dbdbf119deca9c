//! Dataset file formats.
//!
//! Edge file: one undirected edge per line, two 0-based integer ids separated
//! by whitespace. Feature file: CSV, row i = features of node i. Label file:
//! one integer per line, -1 = unlabeled. Split file: JSON object
//! `{"train": [...], "valid": [...], "test": [...]}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{Graph, Splits, UNLABELED};
use crate::error::{Error, Result};

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("expected two node ids, got '{line}'"),
                ))
            }
        };
        let u: usize = a
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("invalid node id '{a}'")))?;
        let v: usize = b
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("invalid node id '{b}'")))?;
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, idx + 1, format!("invalid number '{cell}'")))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("row has {} columns, expected {w}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "feature file {} is empty",
            path.display()
        )));
    }
    let d = width.unwrap();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / d;
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Dimension(format!("feature matrix: {e}")))
}

fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let l: i64 = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("invalid label '{line}'")))?;
        labels.push(l);
    }
    Ok(labels)
}

fn read_splits(path: &Path) -> Result<Splits> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Validation(format!("split file {}: {e}", path.display()))
    })
}

/// Loads a graph from the four dataset files.
///
/// Node count comes from the feature file; the number of classes is the
/// largest label plus one. Self-loops and duplicate edges are dropped with a
/// warning in the log.
pub fn load_graph(
    edge_path: &Path,
    feature_path: &Path,
    label_path: &Path,
    split_path: &Path,
) -> Result<Graph> {
    let features = read_features(feature_path)?;
    let labels = read_labels(label_path)?;
    if labels.len() != features.nrows() {
        return Err(Error::Validation(format!(
            "{} has {} rows but {} has {} labels",
            feature_path.display(),
            features.nrows(),
            label_path.display(),
            labels.len()
        )));
    }
    let num_classes = labels
        .iter()
        .copied()
        .filter(|&l| l != UNLABELED)
        .max()
        .map(|m| m as usize + 1)
        .ok_or_else(|| Error::Validation("label file contains no labeled node".into()))?;
    let edges = read_edges(edge_path)?;
    let splits = read_splits(split_path)?;
    let (graph, stats) = Graph::new_with_stats(features, &edges, labels, num_classes, splits)?;
    if stats.total() > 0 {
        log::warn!(
            "{}: dropped {} self-loop(s) and {} duplicate edge(s)",
            edge_path.display(),
            stats.self_loops_dropped,
            stats.duplicates_dropped
        );
    }
    Ok(graph)
}

/// Writes a graph back out as `edges.txt`, `features.csv`, `labels.txt`, and
/// `splits.json` under `dir`.
pub fn save_dataset(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut edges = String::new();
    for (u, v) in g.adjacency().undirected_edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    fs::write(dir.join("edges.txt"), edges)?;

    let mut features = Vec::new();
    for row in g.features().rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        writeln!(features, "{}", cells.join(","))?;
    }
    fs::write(dir.join("features.csv"), features)?;

    let labels: String = g.labels().iter().map(|l| format!("{l}\n")).collect();
    fs::write(dir.join("labels.txt"), labels)?;

    let splits = serde_json::to_string_pretty(g.splits())?;
    fs::write(dir.join("splits.json"), splits)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    fn load(dir: &TempDir) -> Result<Graph> {
        load_graph(
            &dir.path().join("edges.txt"),
            &dir.path().join("features.csv"),
            &dir.path().join("labels.txt"),
            &dir.path().join("splits.json"),
        )
    }

    #[test]
    fn loads_a_small_dataset() {
        let dir = TempDir::new().unwrap();
        write(&dir, "edges.txt", "0 1\n1 2\n");
        write(&dir, "features.csv", "1.0,0.0\n0.5,0.5\n0.0,1.0\n");
        write(&dir, "labels.txt", "0\n-1\n1\n");
        write(
            &dir,
            "splits.json",
            r#"{"train": [0], "valid": [2], "test": [1]}"#,
        );
        let g = load(&dir).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.num_classes(), 2);
        assert_eq!(g.adjacency().nnz(), 4);
        assert!(g.adjacency().has_edge(0, 1));
        assert!(g.adjacency().has_edge(2, 1));
        assert_eq!(g.splits().train, vec![0]);
    }

    #[test]
    fn self_loop_is_dropped() {
        let dir = TempDir::new().unwrap();
        write(&dir, "edges.txt", "0 0\n0 1\n");
        write(&dir, "features.csv", "1.0\n2.0\n");
        write(&dir, "labels.txt", "0\n0\n");
        write(&dir, "splits.json", r#"{"train": [], "valid": [], "test": []}"#);
        let g = load(&dir).unwrap();
        assert_eq!(g.adjacency().edge_count(), 1);
        assert!(!g.adjacency().has_edge(0, 0));
    }

    #[test]
    fn malformed_line_names_file_and_line() {
        let dir = TempDir::new().unwrap();
        write(&dir, "edges.txt", "0 1\nbogus\n");
        write(&dir, "features.csv", "1.0\n2.0\n");
        write(&dir, "labels.txt", "0\n0\n");
        write(&dir, "splits.json", r#"{"train": [], "valid": [], "test": []}"#);
        let err = load(&dir).unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert!(file.ends_with("edges.txt"));
                assert_eq!(line, 2);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn row_count_mismatch_is_a_validation_error() {
        let dir = TempDir::new().unwrap();
        write(&dir, "edges.txt", "0 1\n");
        write(&dir, "features.csv", "1.0\n2.0\n3.0\n");
        write(&dir, "labels.txt", "0\n0\n0\n0\n");
        write(&dir, "splits.json", r#"{"train": [], "valid": [], "test": []}"#);
        assert!(matches!(load(&dir).unwrap_err(), Error::Validation(_)));
    }

    #[test]
    fn split_index_out_of_range_is_rejected() {
        let dir = TempDir::new().unwrap();
        write(&dir, "edges.txt", "0 1\n");
        write(&dir, "features.csv", "1.0\n2.0\n");
        write(&dir, "labels.txt", "0\n1\n");
        write(&dir, "splits.json", r#"{"train": [9], "valid": [], "test": []}"#);
        assert!(matches!(load(&dir).unwrap_err(), Error::Validation(_)));
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = TempDir::new().unwrap();
        write(&dir, "edges.txt", "0 1\n1 2\n0 3\n");
        write(
            &dir,
            "features.csv",
            "1.0,0.25\n0.5,0.5\n0.0,1.0\n0.125,0.75\n",
        );
        write(&dir, "labels.txt", "0\n-1\n1\n1\n");
        write(
            &dir,
            "splits.json",
            r#"{"train": [0], "valid": [2], "test": [3]}"#,
        );
        let g = load(&dir).unwrap();

        let out = TempDir::new().unwrap();
        save_dataset(&g, out.path()).unwrap();
        let g2 = load(&out).unwrap();
        assert_eq!(g.features(), g2.features());
        assert_eq!(g.labels(), g2.labels());
        assert_eq!(g.splits(), g2.splits());
        let e1: Vec<_> = g.adjacency().undirected_edges().collect();
        let e2: Vec<_> = g2.adjacency().undirected_edges().collect();
        assert_eq!(e1, e2);
    }
}
