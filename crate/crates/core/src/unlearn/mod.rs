//! Edge unlearning methods.
//!
//! Every method returns an [`UnlearnedPredictor`]: a model, the graph it
//! runs inference on, and optionally a trained deletion operator. This puts
//! structure-editing and parameter-editing methods behind one interface.
//!
//! | method         | parameters            | inference graph |
//! |----------------|-----------------------|-----------------|
//! | `retrain`      | trained from scratch on the retain set | `G_r` |
//! | `utu`          | unchanged             | `G_r`           |
//! | `grad_ascent`  | a few ascent steps on the forget-edge loss | `G` |
//! | `gnndelete`    | frozen, plus deletion operator | `G_r`  |
//! | `gnndelete_ni` | as above, neighborhood loss only | `G_r` |
//!
//! `G` here is the training graph (training edges only) and
//! `G_r = G` with the forget edges unlinked.

mod gnndelete;
mod losses;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diff::Tape;
use crate::error::{Error, Result};
use crate::gnn::{
    edge_logits, encode, fit, forward, score, Adam, AdamConfig, Model, ModelConfig,
    TrainConfig,
};
use crate::graph::{to_message_structure, Edge, EdgeSplit, Graph, UnlearnSplit};
use crate::matrix::Matrix;

pub use crate::gnn::{DeletionLayer, DeletionOperator};
pub use gnndelete::{deletion_masks, gnndelete, gnndelete_ni, BranchGraph, DeleteObjective, GnnDeleteConfig};
pub use losses::{dec_loss, ni_loss, sample_random_pairs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The trained model before any unlearning.
    Original,
    Retrain,
    GradAscent,
    #[serde(rename = "gnndelete")]
    GnnDelete,
    #[serde(rename = "gnndelete_ni")]
    GnnDeleteNi,
    Utu,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Retrain,
        Method::GradAscent,
        Method::GnnDelete,
        Method::GnnDeleteNi,
        Method::Utu,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Retrain => "retrain",
            Method::GradAscent => "grad_ascent",
            Method::GnnDelete => "gnndelete",
            Method::GnnDeleteNi => "gnndelete_ni",
            Method::Utu => "utu",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::Original]
            .into_iter()
            .chain(Method::ALL)
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

/// A model paired with the graph it predicts on.
#[derive(Clone, Debug)]
pub struct UnlearnedPredictor {
    pub method: Method,
    pub model: Arc<Model>,
    pub inference_graph: Graph,
    pub deletion_ops: Option<DeletionOperator>,
    /// Seconds spent unlearning, monotonic clock.
    pub wall_time: f64,
    /// An iterative method hit a non-finite loss and stopped early.
    pub diverged: bool,
    embeddings: OnceLock<Matrix>,
}

impl UnlearnedPredictor {
    pub fn new(
        method: Method,
        model: Arc<Model>,
        inference_graph: Graph,
        deletion_ops: Option<DeletionOperator>,
        wall_time: f64,
    ) -> Self {
        UnlearnedPredictor {
            method,
            model,
            inference_graph,
            deletion_ops,
            wall_time,
            diverged: false,
            embeddings: OnceLock::new(),
        }
    }

    /// The trained model on its own training graph.
    pub fn original(model: Arc<Model>, train_graph: Graph) -> Self {
        Self::new(Method::Original, model, train_graph, None, 0.0)
    }

    /// Final-layer embeddings, computed once.
    pub fn embeddings(&self) -> Result<&Matrix> {
        if let Some(h) = self.embeddings.get() {
            return Ok(h);
        }
        let h = forward(&self.model, &self.inference_graph, self.deletion_ops.as_ref())?.matrix;
        Ok(self.embeddings.get_or_init(|| h))
    }

    pub fn predict(&self, edges: &[Edge]) -> Result<Vec<f64>> {
        let h = self.embeddings()?;
        edges
            .iter()
            .map(|e| {
                if e.0.max(e.1) >= h.rows() {
                    Err(Error::invalid(format!("edge {e:?} outside the graph")))
                } else {
                    Ok(score(h.row(e.0), h.row(e.1)))
                }
            })
            .collect()
    }
}

/// Trains from the original initialization on the retain set only, with
/// the forget edges unlinked from the message graph. `graph` is the full
/// graph, as for [`train`](crate::gnn::train).
pub fn retrain(
    config: &ModelConfig,
    graph: &Graph,
    split: &EdgeSplit,
    usplit: &UnlearnSplit,
    tcfg: &TrainConfig,
) -> Result<UnlearnedPredictor> {
    if usplit.retain.is_empty() {
        return Err(Error::invalid("retain set is empty, nothing to retrain on"));
    }
    let start = Instant::now();
    let retain_graph = split.train_graph(graph)?.unlink(&usplit.forget)?;
    let model = fit(config, &retain_graph, &usplit.retain, &split.val_pos, &split.val_neg, tcfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(UnlearnedPredictor::new(
        Method::Retrain,
        Arc::new(model),
        retain_graph,
        None,
        elapsed,
    ))
}

/// Unlink to Unlearn: the unchanged model on `G_r`. `graph` is the training
/// graph. Only the unlink is timed.
pub fn utu(model: &Arc<Model>, graph: &Graph, usplit: &UnlearnSplit) -> Result<UnlearnedPredictor> {
    let start = Instant::now();
    let retain_graph = graph.unlink(&usplit.forget)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(UnlearnedPredictor::new(
        Method::Utu,
        Arc::clone(model),
        retain_graph,
        None,
        elapsed,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradAscentConfig {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for GradAscentConfig {
    fn default() -> Self {
        GradAscentConfig {
            steps: 5,
            learning_rate: 0.01,
        }
    }
}

/// Adam steps that increase the cross-entropy of the forget edges (labeled
/// as present) with the training graph `graph` unchanged.
///
/// A non-finite loss stops the loop; the last finite parameters are kept
/// and the predictor is flagged as diverged.
pub fn gradient_ascent(
    model: &Model,
    graph: &Graph,
    usplit: &UnlearnSplit,
    cfg: &GradAscentConfig,
) -> Result<UnlearnedPredictor> {
    let start = Instant::now();
    let mut params = model.clone();
    let mut diverged = false;
    if !usplit.forget.is_empty() && cfg.steps > 0 {
        let features = graph
            .features()
            .ok_or_else(|| Error::invalid("graph has no node features"))?;
        let ms = to_message_structure(graph, model.config.backbone);
        let labels = vec![1.0; usplit.forget.len()];
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: cfg.learning_rate,
                ..AdamConfig::default()
            },
            params.tensors(),
        );
        for _ in 0..cfg.steps {
            let mut tape = Tape::new();
            let x = tape.constant(features.clone());
            let vars = params.to_vars(&mut tape, true);
            let h = *encode(&mut tape, &params.config, &vars, &ms, x, None)?
                .last()
                .expect("at least one layer");
            let logits = edge_logits(&mut tape, h, &usplit.forget)?;
            let loss = tape.bce_with_logits(logits, &labels)?;
            if !tape.value(loss).item().is_finite() {
                diverged = true;
                break;
            }
            let ascent = tape.scale(loss, -1.0);
            tape.backward(ascent)?;
            let grads: Vec<Matrix> = vars
                .iter()
                .flat_map(|l| l.tensors())
                .map(|&v| tape.grad(v))
                .collect();
            let before = params.clone();
            adam.step(params.tensors_mut(), &grads)?;
            if params.tensors().iter().any(|t| !t.is_finite()) {
                params = before;
                diverged = true;
                break;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut pred = UnlearnedPredictor::new(
        Method::GradAscent,
        Arc::new(params),
        graph.clone(),
        None,
        elapsed,
    );
    pred.diverged = diverged;
    Ok(pred)
}
