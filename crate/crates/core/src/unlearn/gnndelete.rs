use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::losses::{dec_loss, ni_loss, sample_random_pairs};
use super::{Method, UnlearnedPredictor};
use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::{
    encode, forward_layers, Adam, AdamConfig, DeletionOperator, Model, OperatorVars,
};
use crate::graph::{enclosing_union, to_message_structure, Edge, Graph, MessageStructure, UnlearnSplit};
use crate::matrix::Matrix;
use crate::seed;

/// Graph the operator-augmented encoder runs on while the operator trains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchGraph {
    /// The training graph with the forget edges unlinked.
    #[default]
    Retain,
    /// The training graph as is.
    Original,
}

impl std::str::FromStr for BranchGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "retain" => Ok(BranchGraph::Retain),
            "original" => Ok(BranchGraph::Original),
            _ => Err(Error::invalid(format!("unknown branch graph {s:?}, expected retain or original"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnDeleteConfig {
    /// Weight of the edge-consistency term; `1 - lambda` weighs the
    /// neighborhood term.
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub random_pair_seed: u64,
    pub branch_graph: BranchGraph,
}

impl Default for GnnDeleteConfig {
    fn default() -> Self {
        GnnDeleteConfig {
            lambda: 0.5,
            epochs: 50,
            learning_rate: 0.01,
            random_pair_seed: 0,
            branch_graph: BranchGraph::Retain,
        }
    }
}

/// The operator-training objective with everything except the operator
/// parameters fixed.
#[derive(Clone, Debug)]
pub struct DeleteObjective {
    pub model: Arc<Model>,
    pub structure: MessageStructure,
    pub features: Matrix,
    /// Original-model embeddings on the training graph, per layer.
    pub targets: Vec<Matrix>,
    /// Per-layer node sets, the `l`-hop neighborhood of the forget edges.
    pub nodes: Vec<Arc<[usize]>>,
    pub forget: Vec<Edge>,
    pub lambda: f64,
}

impl DeleteObjective {
    /// Records the summed per-layer loss on `tape` for the given operator
    /// handles and random pairs.
    pub fn record(
        &self,
        tape: &mut Tape,
        ops: &[OperatorVars],
        pairs: &[(usize, usize)],
    ) -> Result<Var> {
        let x = tape.constant(self.features.clone());
        let params = self.model.to_vars(tape, false);
        let outs = encode(tape, &self.model.config, &params, &self.structure, x, Some(ops))?;
        let mut total: Option<Var> = None;
        for (l, &h) in outs.iter().enumerate() {
            let mut terms = Vec::with_capacity(2);
            if self.lambda > 0.0 {
                let dec = dec_loss(tape, h, &self.targets[l], &self.forget, pairs)?;
                terms.push(tape.scale(dec, self.lambda));
            }
            if self.lambda < 1.0 {
                let ni = ni_loss(tape, h, &self.targets[l], &self.nodes[l])?;
                terms.push(tape.scale(ni, 1.0 - self.lambda));
            }
            for t in terms {
                total = Some(match total {
                    Some(acc) => tape.add(acc, t)?,
                    None => t,
                });
            }
        }
        Ok(total.expect("at least one layer and one term"))
    }
}

/// Per-layer masks over the `l`-hop neighborhoods of the forget edges in
/// `graph`, for `l = 1..=layers`.
pub fn deletion_masks(graph: &Graph, forget: &[Edge], layers: usize) -> Vec<Vec<bool>> {
    (1..=layers).map(|l| enclosing_union(graph, forget, l)).collect()
}

/// Trains a deletion operator with the model frozen. `graph` is the
/// training graph; inference runs on `G_r`.
pub fn gnndelete(
    model: &Arc<Model>,
    graph: &Graph,
    usplit: &UnlearnSplit,
    cfg: &GnnDeleteConfig,
) -> Result<UnlearnedPredictor> {
    run(Method::GnnDelete, model, graph, usplit, cfg)
}

/// [`gnndelete`] with the neighborhood term only.
pub fn gnndelete_ni(
    model: &Arc<Model>,
    graph: &Graph,
    usplit: &UnlearnSplit,
    cfg: &GnnDeleteConfig,
) -> Result<UnlearnedPredictor> {
    let cfg = GnnDeleteConfig { lambda: 0.0, ..*cfg };
    run(Method::GnnDeleteNi, model, graph, usplit, &cfg)
}

fn run(
    method: Method,
    model: &Arc<Model>,
    graph: &Graph,
    usplit: &UnlearnSplit,
    cfg: &GnnDeleteConfig,
) -> Result<UnlearnedPredictor> {
    if usplit.forget.is_empty() {
        return Err(Error::invalid("deletion operator needs a non-empty forget set"));
    }
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(Error::invalid(format!("lambda {} outside [0, 1]", cfg.lambda)));
    }
    let start = Instant::now();
    let retain_graph = graph.unlink(&usplit.forget)?;
    let masks = deletion_masks(graph, &usplit.forget, model.config.num_layers);
    let nodes: Vec<Arc<[usize]>> = masks
        .iter()
        .map(|m| m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
        .collect();
    let mut ops = DeletionOperator::identity(&model.config, masks)?;
    let mut diverged = false;
    if cfg.epochs > 0 {
        let branch = match cfg.branch_graph {
            BranchGraph::Retain => &retain_graph,
            BranchGraph::Original => graph,
        };
        let objective = DeleteObjective {
            model: Arc::clone(model),
            structure: to_message_structure(branch, model.config.backbone),
            features: branch
                .features()
                .ok_or_else(|| Error::invalid("graph has no node features"))?
                .clone(),
            targets: forward_layers(model, graph, None)?,
            nodes,
            forget: usplit.forget.clone(),
            lambda: cfg.lambda,
        };
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: cfg.learning_rate,
                ..AdamConfig::default()
            },
            ops.layers.iter().flat_map(|l| [&l.weight, &l.bias]),
        );
        for epoch in 0..cfg.epochs {
            let pairs = if cfg.lambda > 0.0 {
                sample_random_pairs(
                    graph.num_nodes(),
                    usplit.forget.len(),
                    seed::derive(cfg.random_pair_seed, &[epoch as u64]),
                )?
            } else {
                Vec::new()
            };
            let mut tape = Tape::new();
            let vars = ops.to_vars(&mut tape, true);
            let loss = objective.record(&mut tape, &vars, &pairs)?;
            if !tape.value(loss).item().is_finite() {
                diverged = true;
                break;
            }
            tape.backward(loss)?;
            let grads: Vec<Matrix> = vars
                .iter()
                .flat_map(|v| [tape.grad(v.weight), tape.grad(v.bias)])
                .collect();
            adam.step(ops.tensors_mut(), &grads)?;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut pred = UnlearnedPredictor::new(method, Arc::clone(model), retain_graph, Some(ops), elapsed);
    pred.diverged = diverged;
    Ok(pred)
}
