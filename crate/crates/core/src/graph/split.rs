use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Edge, Graph};
use crate::error::{Error, Result};
use crate::seed;

/// Train/validation/test partition of a graph's edges plus evaluation
/// negatives for validation and test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub seed: u64,
}

impl EdgeSplit {
    /// The graph models are trained on: all nodes, only training edges.
    pub fn train_graph(&self, graph: &Graph) -> Result<Graph> {
        graph.with_edges(self.train_pos.iter().copied())
    }
}

/// Forget set `E_d` and retain set `E_r = train_pos \ E_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnlearnSplit {
    pub forget: Vec<Edge>,
    pub retain: Vec<Edge>,
    pub ratio: f64,
}

// Guards `floor` against products such as 0.29 * 100 = 28.999999999999996.
const FLOOR_SLACK: f64 = 1e-9;

/// Shuffles the edges and cuts them into `⌊train_frac·|E|⌋` training,
/// `⌊val_frac·|E|⌋` validation and the remainder as test edges.
pub fn split_edges(graph: &Graph, train_frac: f64, val_frac: f64, seed: u64) -> Result<EdgeSplit> {
    if !(0.0..=1.0).contains(&train_frac)
        || !(0.0..=1.0).contains(&val_frac)
        || train_frac + val_frac > 1.0 + FLOOR_SLACK
    {
        return Err(Error::invalid(format!(
            "split fractions out of range: train={train_frac}, val={val_frac}"
        )));
    }
    let m = graph.num_edges();
    if m < 20 {
        return Err(Error::invalid(format!("need at least 20 edges to split, got {m}")));
    }
    let mut edges = graph.edge_list();
    edges.shuffle(&mut seed::rng(seed));
    let n_train = (train_frac * m as f64 + FLOOR_SLACK).floor() as usize;
    let n_val = ((val_frac * m as f64 + FLOOR_SLACK).floor() as usize).min(m - n_train);
    let test_pos = edges.split_off(n_train + n_val);
    let val_pos = edges.split_off(n_train);
    let train_pos = edges;

    let val_neg = sample_negative_edges(graph, val_pos.len(), &[], seed::derive(seed, &[seed::VAL_NEG]))?;
    let test_neg = sample_negative_edges(
        graph,
        test_pos.len(),
        &val_neg,
        seed::derive(seed, &[seed::TEST_NEG]),
    )?;
    Ok(EdgeSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg,
        test_neg,
        seed,
    })
}

/// Samples `round(ratio · |train_pos|)` training edges (round half up) as
/// the forget set. The retain set keeps the training order.
pub fn sample_forget_set(split: &EdgeSplit, ratio: f64, seed: u64) -> Result<UnlearnSplit> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("forget ratio must be in (0, 1], got {ratio}")));
    }
    let n = split.train_pos.len();
    let k = ((ratio * n as f64) + 0.5).floor() as usize;
    let mut chosen = vec![false; n];
    for i in index::sample(&mut seed::rng(seed), n, k.min(n)) {
        chosen[i] = true;
    }
    let (mut forget, mut retain) = (Vec::with_capacity(k), Vec::with_capacity(n - k));
    for (&e, &c) in split.train_pos.iter().zip(&chosen) {
        if c {
            forget.push(e)
        } else {
            retain.push(e)
        }
    }
    Ok(UnlearnSplit {
        forget,
        retain,
        ratio,
    })
}

/// Uniformly samples `count` distinct node pairs that are neither edges of
/// `graph` nor listed in `exclude`.
///
/// Rejection sampling runs for at most `100 · count` draws; whatever is
/// still missing after that is filled from a shuffled enumeration of the
/// remaining complement.
pub fn sample_negative_edges(
    graph: &Graph,
    count: usize,
    exclude: &[Edge],
    seed: u64,
) -> Result<Vec<Edge>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = graph.num_nodes();
    let excluded: HashSet<Edge> = exclude
        .iter()
        .map(|e| Edge::new(e.0, e.1))
        .filter(|e| !e.is_loop() && e.1 < n && !graph.contains(*e))
        .collect();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs - graph.num_edges() - excluded.len();
    if count > available {
        return Err(Error::InfeasibleNegatives {
            requested: count,
            available,
        });
    }

    let mut rng = seed::rng(seed);
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let usable = |e: Edge, chosen: &HashSet<Edge>| {
        !graph.contains(e) && !excluded.contains(&e) && !chosen.contains(&e)
    };
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let e = Edge::new(a, b);
        if usable(e, &chosen) {
            chosen.insert(e);
            out.push(e);
        }
    }
    if out.len() < count {
        let mut rest: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| Edge(u, v)))
            .filter(|&e| usable(e, &chosen))
            .collect();
        rest.shuffle(&mut rng);
        out.extend(rest.into_iter().take(count - out.len()));
    }
    Ok(out)
}
