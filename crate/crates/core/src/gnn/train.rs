use serde::{Deserialize, Serialize};

use super::{encode, lp_loss, Adam, AdamConfig, Model, ModelConfig};
use crate::diff::Tape;
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::graph::{sample_negative_edges, to_message_structure, Edge, EdgeSplit, Graph, MessageStructure};
use crate::matrix::{dot, Matrix};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub negatives_per_positive: usize,
    pub seed: u64,
    /// Epochs without a validation AUC improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            negatives_per_positive: 1,
            seed: 0,
            patience: 50,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.negatives_per_positive == 0 || self.patience == 0 {
            return Err(Error::invalid(format!("training settings must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Trains a link predictor on the training edges of `split`. Only those
/// edges carry messages; validation and test edges stay hidden.
pub fn train(config: &ModelConfig, graph: &Graph, split: &EdgeSplit, tcfg: &TrainConfig) -> Result<Model> {
    let message_graph = split.train_graph(graph)?;
    fit(config, &message_graph, &split.train_pos, &split.val_pos, &split.val_neg, tcfg)
}

/// Full-batch training on an explicit message graph and positive set.
///
/// Each epoch draws `negatives_per_positive · |positives|` fresh non-edges of
/// `message_graph`, takes one Adam step on the cross-entropy loss, and scores
/// the validation pairs. The parameters of the best validation epoch are
/// returned; with no validation pairs, the final parameters.
pub fn fit(
    config: &ModelConfig,
    message_graph: &Graph,
    positives: &[Edge],
    val_pos: &[Edge],
    val_neg: &[Edge],
    tcfg: &TrainConfig,
) -> Result<Model> {
    tcfg.validate()?;
    if positives.is_empty() {
        return Err(Error::invalid("no positive training edges"));
    }
    let features = message_graph
        .features()
        .ok_or_else(|| Error::invalid("graph has no node features"))?;
    let mut model = Model::init(config, features.cols(), seed::derive(tcfg.seed, &[seed::INIT]))?;
    if tcfg.epochs == 0 {
        return Ok(model);
    }
    let ms = to_message_structure(message_graph, config.backbone);
    let mut adam = Adam::new(tcfg.adam(), model.tensors());
    let validate = !val_pos.is_empty() && !val_neg.is_empty();
    let mut best: Option<(f64, Model)> = None;
    let mut stale = 0;

    for epoch in 0..tcfg.epochs {
        let negatives = sample_negative_edges(
            message_graph,
            positives.len() * tcfg.negatives_per_positive,
            &[],
            seed::derive(tcfg.seed, &[seed::EPOCH_NEG, epoch as u64]),
        )?;
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let params = model.to_vars(&mut tape, true);
        let h = *encode(&mut tape, config, &params, &ms, x, None)?
            .last()
            .expect("at least one layer");
        let loss = lp_loss(&mut tape, h, positives, &negatives)?;
        if !tape.value(loss).item().is_finite() {
            return Err(Error::NonFinite(epoch));
        }
        tape.backward(loss)?;
        let grads: Vec<Matrix> = params
            .iter()
            .flat_map(|l| l.tensors())
            .map(|&v| tape.grad(v))
            .collect();
        adam.step(model.tensors_mut(), &grads)?;

        if validate {
            let auc = validation_auc(&model, &ms, features, val_pos, val_neg)?;
            match &best {
                Some((best_auc, _)) if auc <= *best_auc => {
                    stale += 1;
                    if stale >= tcfg.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((auc, model.clone()));
                    stale = 0;
                }
            }
        }
    }
    Ok(best.map_or(model, |(_, m)| m))
}

fn validation_auc(
    model: &Model,
    ms: &MessageStructure,
    features: &Matrix,
    val_pos: &[Edge],
    val_neg: &[Edge],
) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(features.clone());
    let params = model.to_vars(&mut tape, false);
    let h = *encode(&mut tape, &model.config, &params, ms, x, None)?
        .last()
        .expect("at least one layer");
    let h = tape.value(h);
    let logit = |e: &Edge| dot(h.row(e.0), h.row(e.1));
    let pos: Vec<f64> = val_pos.iter().map(logit).collect();
    let neg: Vec<f64> = val_neg.iter().map(logit).collect();
    roc_auc(&pos, &neg)
}
