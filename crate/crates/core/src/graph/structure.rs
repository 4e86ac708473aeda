use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Edge, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Gcn,
    Gat,
    Gin,
}

impl Backbone {
    pub const ALL: [Backbone; 3] = [Backbone::Gcn, Backbone::Gat, Backbone::Gin];

    pub fn name(self) -> &'static str {
        match self {
            Backbone::Gcn => "GCN",
            Backbone::Gat => "GAT",
            Backbone::Gin => "GIN",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Backbone::Gcn),
            "gat" => Ok(Backbone::Gat),
            "gin" => Ok(Backbone::Gin),
            _ => Err(Error::invalid(format!("unknown backbone {s:?}"))),
        }
    }
}

/// Compressed sparse row matrix. Column indices are sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Square matrix from per-row `(col, value)` lists, which get sorted.
    fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Csr {
            n_rows: n,
            n_cols: n,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    /// Row index of every stored entry, in storage order.
    pub fn entry_rows(&self) -> Vec<usize> {
        (0..self.n_rows)
            .flat_map(|r| std::iter::repeat_n(r, self.indptr[r + 1] - self.indptr[r]))
            .collect()
    }

    /// `self · x`.
    pub fn matmul(&self, x: &Matrix) -> Result<Matrix> {
        if self.n_cols != x.rows() {
            return Err(Error::Shape {
                op: "sparse_matmul",
                lhs: (self.n_rows, self.n_cols),
                rhs: x.shape(),
            });
        }
        let mut out = Matrix::zeros(self.n_rows, x.cols());
        for r in 0..self.n_rows {
            let out_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`.
    pub fn t_matmul(&self, g: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.n_cols, g.cols());
        for r in 0..self.n_rows {
            let g_row = g.row(r);
            for (c, v) in self.row(r) {
                for (o, &gv) in out.row_mut(c).iter_mut().zip(g_row) {
                    *o += v * gv;
                }
            }
        }
        out
    }
}

/// Per-backbone precomputed neighborhoods.
#[derive(Clone, Debug)]
pub enum MessageStructure {
    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` with `d̃ = degree + 1`.
    Gcn { adj: Arc<Csr> },
    /// Neighbor lists including the node itself; `dst[k]` is the row of
    /// stored entry `k` (the attending node), `src[k]` its column.
    Gat {
        adj: Arc<Csr>,
        dst: Arc<[usize]>,
        src: Arc<[usize]>,
    },
    /// Neighbor lists without the node itself, all weights 1.
    Gin { adj: Arc<Csr> },
}

impl MessageStructure {
    pub fn backbone(&self) -> Backbone {
        match self {
            MessageStructure::Gcn { .. } => Backbone::Gcn,
            MessageStructure::Gat { .. } => Backbone::Gat,
            MessageStructure::Gin { .. } => Backbone::Gin,
        }
    }

    pub fn adjacency(&self) -> &Csr {
        match self {
            MessageStructure::Gcn { adj }
            | MessageStructure::Gat { adj, .. }
            | MessageStructure::Gin { adj } => adj,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency().n_rows
    }
}

pub fn to_message_structure(graph: &Graph, backbone: Backbone) -> MessageStructure {
    let n = graph.num_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for Edge(u, v) in graph.edges() {
        rows[u].push((v, 1.0));
        rows[v].push((u, 1.0));
    }
    match backbone {
        Backbone::Gcn => {
            let deg: Vec<f64> = rows.iter().map(|r| (r.len() + 1) as f64).collect();
            for (i, row) in rows.iter_mut().enumerate() {
                row.push((i, 1.0));
                for (j, w) in row.iter_mut() {
                    *w = 1.0 / (deg[i] * deg[*j]).sqrt();
                }
            }
            MessageStructure::Gcn {
                adj: Arc::new(Csr::from_rows(rows)),
            }
        }
        Backbone::Gat => {
            for (i, row) in rows.iter_mut().enumerate() {
                row.push((i, 1.0));
            }
            let adj = Csr::from_rows(rows);
            let dst = adj.entry_rows().into();
            let src = adj.indices.clone().into();
            MessageStructure::Gat {
                adj: Arc::new(adj),
                dst,
                src,
            }
        }
        Backbone::Gin => MessageStructure::Gin {
            adj: Arc::new(Csr::from_rows(rows)),
        },
    }
}
