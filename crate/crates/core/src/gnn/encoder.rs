use std::sync::Arc;

use super::{DeletionOperator, Embeddings, Layer, Model, ModelConfig};
use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{to_message_structure, Edge, Graph, MessageStructure};
use crate::matrix::{dot, Matrix};

/// Tape handles for one trained or frozen [`DeletionLayer`](super::DeletionLayer).
#[derive(Clone, Debug)]
pub struct OperatorVars {
    pub weight: Var,
    pub bias: Var,
    pub mask: Arc<[bool]>,
}

/// Runs the encoder on `tape` and returns the output of every layer, after
/// the deletion operator for that layer when one is given.
pub fn encode(
    tape: &mut Tape,
    config: &ModelConfig,
    layers: &[Layer<Var>],
    ms: &MessageStructure,
    features: Var,
    ops: Option<&[OperatorVars]>,
) -> Result<Vec<Var>> {
    if ms.backbone() != config.backbone {
        return Err(Error::invalid(format!(
            "message structure built for {} but model is {}",
            ms.backbone(),
            config.backbone
        )));
    }
    if let Some(ops) = ops {
        if ops.len() != layers.len() {
            return Err(Error::invalid(format!(
                "{} deletion layers for {} encoder layers",
                ops.len(),
                layers.len()
            )));
        }
    }
    let n = ms.num_nodes();
    let mut h = features;
    let mut outputs = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let last = l + 1 == layers.len();
        h = match (layer, ms) {
            (Layer::Gcn { weight, bias }, MessageStructure::Gcn { adj }) => {
                let xw = tape.matmul(h, *weight)?;
                let agg = tape.sparse_matmul(adj, xw)?;
                tape.add_bias(agg, *bias)?
            }
            (Layer::Gat { heads, bias }, MessageStructure::Gat { dst, src, .. }) => {
                let mut head_out = Vec::with_capacity(heads.len());
                for head in heads {
                    let z = tape.matmul(h, head.weight)?;
                    let s_src = tape.matmul(z, head.att_src)?;
                    let s_dst = tape.matmul(z, head.att_dst)?;
                    let e_src = tape.gather_rows(s_src, src)?;
                    let e_dst = tape.gather_rows(s_dst, dst)?;
                    let e = tape.add(e_dst, e_src)?;
                    let e = tape.leaky_relu(e, config.gat_slope);
                    let alpha = tape.segment_softmax(e, dst, n)?;
                    let z_src = tape.gather_rows(z, src)?;
                    let msg = tape.scale_rows(z_src, alpha)?;
                    head_out.push(tape.segment_sum(msg, dst, n)?);
                }
                let mut combined = head_out[0];
                for &next in &head_out[1..] {
                    combined = if last {
                        tape.add(combined, next)?
                    } else {
                        tape.concat_cols(combined, next)?
                    };
                }
                if last && heads.len() > 1 {
                    combined = tape.scale(combined, 1.0 / heads.len() as f64);
                }
                tape.add_bias(combined, *bias)?
            }
            (Layer::Gin { w1, b1, w2, b2 }, MessageStructure::Gin { adj }) => {
                let neigh = tape.sparse_matmul(adj, h)?;
                let own = tape.scale(h, 1.0 + config.gin_eps);
                let agg = tape.add(own, neigh)?;
                let hidden = tape.matmul(agg, *w1)?;
                let hidden = tape.add_bias(hidden, *b1)?;
                let hidden = tape.relu(hidden);
                let out = tape.matmul(hidden, *w2)?;
                tape.add_bias(out, *b2)?
            }
            _ => return Err(Error::invalid("layer parameters do not match the backbone")),
        };
        if !last {
            h = tape.relu(h);
        }
        if let Some(op) = ops.map(|ops| &ops[l]) {
            let mapped = tape.matmul(h, op.weight)?;
            let mapped = tape.add_bias(mapped, op.bias)?;
            h = tape.mask_rows(h, mapped, &op.mask)?;
        }
        outputs.push(h);
    }
    Ok(outputs)
}

fn graph_features(model: &Model, graph: &Graph) -> Result<Matrix> {
    let x = graph
        .features()
        .ok_or_else(|| Error::invalid("graph has no node features"))?;
    if x.cols() != model.in_dim {
        return Err(Error::invalid(format!(
            "features have {} columns, model expects {}",
            x.cols(),
            model.in_dim
        )));
    }
    Ok(x.clone())
}

/// Embeddings of every layer with frozen parameters.
pub fn forward_layers(
    model: &Model,
    graph: &Graph,
    ops: Option<&DeletionOperator>,
) -> Result<Vec<Matrix>> {
    let x = graph_features(model, graph)?;
    let ms = to_message_structure(graph, model.config.backbone);
    let mut tape = Tape::new();
    let x = tape.constant(x);
    let params = model.to_vars(&mut tape, false);
    let op_vars = ops.map(|o| o.to_vars(&mut tape, false));
    let outs = encode(&mut tape, &model.config, &params, &ms, x, op_vars.as_deref())?;
    Ok(outs.iter().map(|&v| tape.value(v).clone()).collect())
}

pub fn forward(model: &Model, graph: &Graph, ops: Option<&DeletionOperator>) -> Result<Embeddings> {
    let matrix = forward_layers(model, graph, ops)?
        .pop()
        .expect("at least one layer");
    Ok(Embeddings {
        matrix,
        provenance: format!(
            "{} {}x{} on {} nodes / {} edges{}",
            model.config.backbone,
            model.config.num_layers,
            model.config.hidden_dim,
            graph.num_nodes(),
            graph.num_edges(),
            if ops.is_some() { " with deletion operator" } else { "" }
        ),
    })
}

/// Edge probability `sigmoid(h_i · h_j)`.
pub fn score(h_i: &[f64], h_j: &[f64]) -> f64 {
    let z = dot(h_i, h_j);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn predict_edges(
    model: &Model,
    graph: &Graph,
    edges: &[Edge],
    ops: Option<&DeletionOperator>,
) -> Result<Vec<f64>> {
    if edges.is_empty() {
        return Ok(Vec::new());
    }
    let h = forward(model, graph, ops)?.matrix;
    if let Some(e) = edges.iter().find(|e| e.1 >= h.rows() || e.0 >= h.rows()) {
        return Err(Error::invalid(format!("edge {e:?} outside the graph")));
    }
    Ok(edges.iter().map(|e| score(h.row(e.0), h.row(e.1))).collect())
}

/// `m x 1` logits `h_u · h_v` for each edge.
pub fn edge_logits(tape: &mut Tape, h: Var, edges: &[Edge]) -> Result<Var> {
    let us: Arc<[usize]> = edges.iter().map(|e| e.0).collect();
    let vs: Arc<[usize]> = edges.iter().map(|e| e.1).collect();
    let hu = tape.gather_rows(h, &us)?;
    let hv = tape.gather_rows(h, &vs)?;
    tape.row_dot(hu, hv)
}

/// Mean binary cross-entropy with positives labeled 1 and negatives 0.
pub fn lp_loss(tape: &mut Tape, h: Var, pos: &[Edge], neg: &[Edge]) -> Result<Var> {
    let edges: Vec<Edge> = pos.iter().chain(neg).copied().collect();
    let labels: Vec<f64> = pos.iter().map(|_| 1.0).chain(neg.iter().map(|_| 0.0)).collect();
    let logits = edge_logits(tape, h, &edges)?;
    tape.bce_with_logits(logits, &labels)
}
