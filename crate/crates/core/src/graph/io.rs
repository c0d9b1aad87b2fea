use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{Graph, NodeId};
use crate::error::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses `u<ws>v` lines; `#` lines and blank lines are skipped.
pub fn parse_edge_list(text: &str, path: &Path) -> Result<Vec<(NodeId, NodeId)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut toks = line.split_whitespace();
        let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(err(format!("expected two node ids, got {line:?}")));
        };
        let u: NodeId = a
            .parse()
            .map_err(|_| err(format!("invalid node id {a:?}")))?;
        let v: NodeId = b
            .parse()
            .map_err(|_| err(format!("invalid node id {b:?}")))?;
        if u == v {
            return Err(err(format!("self-loop on node {u}")));
        }
        out.push((u, v));
    }
    Ok(out)
}

/// Loads an undirected edge list. `n` is `max id + 1`, or `n_hint` if larger.
pub fn load_edge_list(path: impl AsRef<Path>, n_hint: Option<usize>) -> Result<Graph> {
    let path = path.as_ref();
    let edges = parse_edge_list(&read_text(path)?, path)?;
    let max_id = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = max_id.max(n_hint.unwrap_or(0));
    Graph::from_edges(n, edges)
}

pub fn write_edge_list(path: impl AsRef<Path>, edges: &[(NodeId, NodeId)]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(edges.len() * 12);
    for &(u, v) in edges {
        writeln!(buf, "{u} {v}").expect("write to Vec");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads `n` lines of whitespace-separated reals.
pub fn load_features(path: impl AsRef<Path>, n: usize) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Format(format!(
            "{}: expected {n} feature rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    let f = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, f), flat).expect("row lengths checked"))
}

/// Loads a citation dataset in the raw `<name>.content` / `<name>.cites`
/// layout: one paper per content line (`id f_1 .. f_F label`), one citation
/// per cites line (`cited citing`). Paper ids are remapped to `0..n` in
/// content-file order; citations to unknown ids are dropped.
pub fn load_planetoid(dir: impl AsRef<Path>, name: &str) -> Result<Graph> {
    let dir = dir.as_ref();
    let content_path = dir.join(format!("{name}.content"));
    let cites_path = dir.join(format!("{name}.cites"));
    let content = read_text(&content_path)?;
    let mut index: HashMap<String, NodeId> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 3 {
            return Err(Error::Parse {
                path: content_path.clone(),
                line: i + 1,
                msg: "expected id, features and label".into(),
            });
        }
        let feats = toks[1..toks.len() - 1]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: content_path.clone(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        index.insert(toks[0].to_string(), rows.len());
        rows.push(feats);
    }
    let n = rows.len();
    let f = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != f) {
        return Err(Error::Format(format!(
            "{}: ragged feature rows",
            content_path.display()
        )));
    }
    let cites = read_text(&cites_path)?;
    let mut edges = Vec::new();
    for line in cites.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            continue;
        }
        if let (Some(&a), Some(&b)) = (index.get(toks[0]), index.get(toks[1])) {
            if a != b {
                edges.push((a, b));
            }
        }
    }
    let x = Array2::from_shape_vec((n, f), rows.into_iter().flatten().collect())
        .expect("row lengths checked");
    Graph::from_edges(n, edges)?.with_features(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn path_graph_from_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "0 1\n1 2");
        let g = load_edge_list(&p, None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn comments_hint_and_symmetry() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "# header\n\n2 0\n0 2\n");
        let g = load_edge_list(&p, Some(10)).unwrap();
        assert_eq!(g.num_nodes(), 10);
        assert_eq!(g.edges(), &[(0, 2)]);
    }

    #[test]
    fn self_loop_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "0 1\n1 1\n");
        match load_edge_list(&p, None) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("self-loop"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "0 1\n3\n");
        assert!(matches!(
            load_edge_list(&p, None),
            Err(Error::Parse { line: 2, .. })
        ));
        let p = write(dir.path(), "h.txt", "0 x\n");
        assert!(matches!(
            load_edge_list(&p, None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn features_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.txt", "1 0.5\n-2 3\n");
        let x = load_features(&p, 2).unwrap();
        assert_eq!(x.dim(), (2, 2));
        assert_eq!(x[[1, 0]], -2.0);
        assert!(load_features(&p, 3).is_err());
    }

    #[test]
    fn planetoid_layout() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "toy.content", "p10 1 0 a\np20 0 1 b\np30 1 1 a\n");
        write(dir.path(), "toy.cites", "p10 p20\np20 p10\np30 p20\np30 p99\n");
        let g = load_planetoid(dir.path(), "toy").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.feature_dim(), 2);
    }
}
