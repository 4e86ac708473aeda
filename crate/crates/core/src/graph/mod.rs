//! Undirected graphs, datasets, edge splits and the unlink primitive.
//!
//! A [`Graph`] stores its edges canonically (`u < v`) in a shared base set
//! plus a shared set of removed edges. [`Graph::unlink`] only extends the
//! removed set, so its cost is proportional to the number of edges being
//! removed and the original graph stays valid alongside the result.

mod generate;
mod io;
mod split;
mod structure;
mod subgraph;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use generate::{generate_features, generate_sbm, SbmParams};
pub use io::{
    load_edge_list, load_features, read_edge_list, read_features, write_edge_list, write_features,
};
pub use split::{sample_forget_set, sample_negative_edges, split_edges, EdgeSplit, UnlearnSplit};
pub use structure::{to_message_structure, Backbone, Csr, MessageStructure};
pub use subgraph::{enclosing_subgraph, enclosing_union};

pub type NodeId = usize;

/// An undirected edge in canonical form, `0 < 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(pub NodeId, pub NodeId);

impl Edge {
    /// Canonical edge between `a` and `b`. Self-loops are representable here
    /// but rejected by [`Graph::new`].
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn is_loop(self) -> bool {
        self.0 == self.1
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

impl From<(NodeId, NodeId)> for Edge {
    fn from((a, b): (NodeId, NodeId)) -> Self {
        Edge::new(a, b)
    }
}

#[derive(Clone)]
pub struct Graph {
    num_nodes: usize,
    base: Arc<BTreeSet<Edge>>,
    removed: Arc<BTreeSet<Edge>>,
    features: Option<Arc<Matrix>>,
}

impl Graph {
    /// Builds a graph from edges in any orientation; duplicates collapse.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for e in edges {
            let e = Edge::new(e.0, e.1);
            if e.is_loop() {
                return Err(Error::invalid(format!("self-loop on node {}", e.0)));
            }
            if e.1 >= num_nodes {
                return Err(Error::invalid(format!(
                    "edge {e:?} references a node outside 0..{num_nodes}"
                )));
            }
            set.insert(e);
        }
        Ok(Graph {
            num_nodes,
            base: Arc::new(set),
            removed: Arc::new(BTreeSet::new()),
            features: None,
        })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Graph {
            num_nodes,
            base: Arc::default(),
            removed: Arc::default(),
            features: None,
        }
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(Error::invalid(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.num_nodes
            )));
        }
        self.features = Some(Arc::new(features));
        Ok(self)
    }

    /// Same nodes and features, different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let g = Graph::new(self.num_nodes, edges)?;
        Ok(Graph {
            features: self.features.clone(),
            ..g
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.base.len() - self.removed.len()
    }

    /// Edges in ascending canonical order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.base
            .iter()
            .copied()
            .filter(move |e| !self.removed.contains(e))
    }

    pub fn edge_list(&self) -> Vec<Edge> {
        self.edges().collect()
    }

    pub fn contains(&self, edge: Edge) -> bool {
        let e = Edge::new(edge.0, edge.1);
        self.base.contains(&e) && !self.removed.contains(&e)
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_deref()
    }

    /// Whether both graphs use the same feature storage, as after [`Graph::unlink`].
    pub fn shares_features_with(&self, other: &Graph) -> bool {
        match (&self.features, &other.features) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            (None, None) => true,
            _ => false,
        }
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.cols())
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for Edge(u, v) in self.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for Edge(u, v) in self.edges() {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Returns a copy of this graph without `edges`. Nodes and features are
    /// shared with `self`, which is left untouched.
    ///
    /// Every edge must currently be present; naming an edge twice (in this
    /// call or across calls) is an error.
    pub fn unlink(&self, edges: &[Edge]) -> Result<Graph> {
        if edges.is_empty() {
            return Ok(self.clone());
        }
        let mut removed = BTreeSet::clone(&self.removed);
        for &e in edges {
            let e = Edge::new(e.0, e.1);
            if !self.base.contains(&e) || !removed.insert(e) {
                return Err(Error::MissingEdge(e));
            }
        }
        Ok(Graph {
            num_nodes: self.num_nodes,
            base: Arc::clone(&self.base),
            removed: Arc::new(removed),
            features: self.features.clone(),
        })
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes
            && self.num_edges() == other.num_edges()
            && self.edges().eq(other.edges())
            && self.features() == other.features()
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("num_nodes", &self.num_nodes)
            .field("num_edges", &self.num_edges())
            .field("feature_dim", &self.feature_dim())
            .finish()
    }
}
