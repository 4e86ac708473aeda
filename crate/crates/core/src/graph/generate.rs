use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Edge, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
}

/// Stochastic block model. Node `i` belongs to block `i / nodes_per_block`;
/// every unordered pair is visited once in lexicographic order and linked
/// with `p_in` or `p_out`.
pub fn generate_sbm(params: SbmParams, seed: u64) -> Result<Graph> {
    let SbmParams {
        blocks,
        nodes_per_block,
        p_in,
        p_out,
    } = params;
    let n = blocks * nodes_per_block;
    if n == 0 {
        return Err(Error::invalid("stochastic block model needs at least one node"));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=p_in).contains(&p_out) {
        return Err(Error::invalid(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u / nodes_per_block == v / nodes_per_block {
                p_in
            } else {
                p_out
            };
            if rng.random::<f64>() < p {
                edges.push(Edge(u, v));
            }
        }
    }
    Graph::new(n, edges)
}

/// Attaches i.i.d. standard Gaussian features.
pub fn generate_features(graph: &Graph, dim: usize, seed: u64) -> Result<Graph> {
    if dim == 0 {
        return Err(Error::invalid("feature dimension must be at least 1"));
    }
    let mut rng = seed::rng(seed);
    let data = (0..graph.num_nodes() * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    graph
        .clone()
        .with_features(Matrix::from_vec(graph.num_nodes(), dim, data)?)
}
