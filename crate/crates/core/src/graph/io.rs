//! Plain-text edge lists and CSV feature matrices.
//!
//! Edge-list format: one `u v` pair of decimal node ids per line. Lines
//! starting with `#` are comments, except `# nodes=N`, which fixes the node
//! count (allowing isolated trailing nodes). Without it the node count is
//! `1 + max id`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Edge, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    read_edge_list(File::open(path)?)
}

pub fn read_edge_list(reader: impl Read) -> Result<Graph> {
    let mut declared_nodes = None;
    let mut edges = Vec::new();
    let mut max_id = None;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("nodes=") {
                let n = n.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad node count header {trimmed:?}"),
                })?;
                declared_nodes = Some(n);
            }
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let parse = |f: Option<&str>| -> Result<usize> {
            f.and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected two non-negative integers, got {trimmed:?}"),
            })
        };
        let u = parse(fields.next())?;
        let v = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("trailing fields in {trimmed:?}"),
            });
        }
        if u == v {
            return Err(Error::SelfLoop {
                line: line_no,
                node: u,
            });
        }
        max_id = max_id.max(Some(u.max(v)));
        edges.push(Edge::new(u, v));
    }
    let inferred = max_id.map_or(0, |m| m + 1);
    let num_nodes = match declared_nodes {
        Some(n) if n < inferred => {
            return Err(Error::invalid(format!(
                "header declares {n} nodes but ids reach {}",
                inferred - 1
            )))
        }
        Some(n) => n,
        None => inferred,
    };
    Graph::new(num_nodes, edges)
}

pub fn write_edge_list(graph: &Graph, mut out: impl Write) -> Result<()> {
    writeln!(out, "# nodes={}", graph.num_nodes())?;
    for Edge(u, v) in graph.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

/// Inverse of [`read_features`]; values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_features(features: &Matrix, mut out: impl Write) -> Result<()> {
    for r in 0..features.rows() {
        let line: Vec<String> = features.row(r).iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Matrix> {
    read_features(File::open(path)?)
}

/// Comma-separated floats, row `i` for node `i`.
pub fn read_features(reader: impl Read) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}
