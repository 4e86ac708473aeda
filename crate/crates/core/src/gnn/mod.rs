//! GCN, GAT and GIN encoders for link prediction.
//!
//! All three backbones run through one forward path, [`encode`], which
//! records the computation on a [`Tape`](crate::diff::Tape) and returns the
//! embeddings of every layer. The final layer has no activation so that
//! embeddings can take negative coordinates; edges are scored with
//! `sigmoid(h_u · h_v)`.
//!
//! An optional [`DeletionOperator`] stack hooks in after each layer and
//! replaces the masked rows `h_i` with `h_i W + b`. This is the insertion
//! point the GNNDelete family of unlearning methods trains.

mod adam;
mod checkpoint;
mod encoder;
mod train;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Backbone;
use crate::matrix::Matrix;
use crate::seed;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, read_deletion_ops, write_checkpoint, write_deletion_ops};
pub use encoder::{
    edge_logits, encode, forward, forward_layers, lp_loss, predict_edges, score, OperatorVars,
};
pub use train::{fit, train, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: Backbone,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub gat_heads: usize,
    pub gat_slope: f64,
    pub gin_eps: f64,
}

impl ModelConfig {
    /// Two layers, one attention head, slope 0.2, `ε = 0`.
    pub fn new(backbone: Backbone, hidden_dim: usize, out_dim: usize) -> Self {
        ModelConfig {
            backbone,
            num_layers: 2,
            hidden_dim,
            out_dim,
            gat_heads: 1,
            gat_slope: 0.2,
            gin_eps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.out_dim == 0 || self.gat_heads == 0 {
            return Err(Error::invalid(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Width of the embeddings leaving layer `l` (0-based).
    pub fn layer_width(&self, l: usize) -> usize {
        if l + 1 == self.num_layers {
            self.out_dim
        } else if self.backbone == Backbone::Gat {
            self.hidden_dim * self.gat_heads
        } else {
            self.hidden_dim
        }
    }

    fn layer_input(&self, in_dim: usize, l: usize) -> usize {
        if l == 0 {
            in_dim
        } else {
            self.layer_width(l - 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatHead<T> {
    pub weight: T,
    pub att_src: T,
    pub att_dst: T,
}

/// Parameters of one message-passing layer. `T` is a [`Matrix`] for stored
/// models and a [`Var`] while recording on a tape.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Gcn { weight: T, bias: T },
    Gat { heads: Vec<GatHead<T>>, bias: T },
    Gin { w1: T, b1: T, w2: T, b2: T },
}

impl<T> Layer<T> {
    /// Parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&T> {
        match self {
            Layer::Gcn { weight, bias } => vec![weight, bias],
            Layer::Gat { heads, bias } => heads
                .iter()
                .flat_map(|h| [&h.weight, &h.att_src, &h.att_dst])
                .chain([bias])
                .collect(),
            Layer::Gin { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut T> {
        match self {
            Layer::Gcn { weight, bias } => vec![weight, bias],
            Layer::Gat { heads, bias } => heads
                .iter_mut()
                .flat_map(|h| [&mut h.weight, &mut h.att_src, &mut h.att_dst])
                .chain([bias])
                .collect(),
            Layer::Gin { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
        }
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Layer<U> {
        match self {
            Layer::Gcn { weight, bias } => Layer::Gcn {
                weight: f(weight),
                bias: f(bias),
            },
            Layer::Gat { heads, bias } => Layer::Gat {
                heads: heads
                    .iter()
                    .map(|h| GatHead {
                        weight: f(&h.weight),
                        att_src: f(&h.att_src),
                        att_dst: f(&h.att_dst),
                    })
                    .collect(),
                bias: f(bias),
            },
            Layer::Gin { w1, b1, w2, b2 } => Layer::Gin {
                w1: f(w1),
                b1: f(b1),
                w2: f(w2),
                b2: f(b2),
            },
        }
    }
}

/// A GNN encoder: configuration plus parameters θ.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub in_dim: usize,
    pub layers: Vec<Layer<Matrix>>,
}

fn glorot(rng: &mut seed::Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized")
}

impl Model {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &ModelConfig, in_dim: usize, seed: u64) -> Result<Model> {
        config.validate()?;
        if in_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        let mut rng = seed::rng(seed);
        let layers = (0..config.num_layers)
            .map(|l| {
                let input = config.layer_input(in_dim, l);
                let width = config.layer_width(l);
                match config.backbone {
                    Backbone::Gcn => Layer::Gcn {
                        weight: glorot(&mut rng, input, width),
                        bias: Matrix::zeros(1, width),
                    },
                    Backbone::Gat => {
                        let final_layer = l + 1 == config.num_layers;
                        let head_dim = if final_layer { width } else { config.hidden_dim };
                        Layer::Gat {
                            heads: (0..config.gat_heads)
                                .map(|_| GatHead {
                                    weight: glorot(&mut rng, input, head_dim),
                                    att_src: glorot(&mut rng, head_dim, 1),
                                    att_dst: glorot(&mut rng, head_dim, 1),
                                })
                                .collect(),
                            bias: Matrix::zeros(1, width),
                        }
                    }
                    Backbone::Gin => Layer::Gin {
                        w1: glorot(&mut rng, input, config.hidden_dim),
                        b1: Matrix::zeros(1, config.hidden_dim),
                        w2: glorot(&mut rng, config.hidden_dim, width),
                        b2: Matrix::zeros(1, width),
                    },
                }
            })
            .collect();
        Ok(Model {
            config: config.clone(),
            in_dim,
            layers,
        })
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(Layer::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(Layer::tensors_mut).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|m| m.len()).sum()
    }

    /// Records the parameters on `tape`, as leaves when `trainable`.
    pub fn to_vars(&self, tape: &mut Tape, trainable: bool) -> Vec<Layer<Var>> {
        self.layers
            .iter()
            .map(|layer| {
                layer.map(&mut |m: &Matrix| {
                    if trainable {
                        tape.leaf(m.clone())
                    } else {
                        tape.constant(m.clone())
                    }
                })
            })
            .collect()
    }
}

/// Affine map `h ↦ h W + b` applied after one layer to the rows selected by
/// `mask`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeletionLayer {
    pub weight: Matrix,
    pub bias: Matrix,
    pub mask: Arc<[bool]>,
}

/// One [`DeletionLayer`] per encoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DeletionOperator {
    pub layers: Vec<DeletionLayer>,
}

impl DeletionOperator {
    /// Identity weights and zero biases: a no-op until trained.
    pub fn identity(config: &ModelConfig, masks: Vec<Vec<bool>>) -> Result<Self> {
        if masks.len() != config.num_layers {
            return Err(Error::invalid(format!(
                "{} masks for {} layers",
                masks.len(),
                config.num_layers
            )));
        }
        let layers = masks
            .into_iter()
            .enumerate()
            .map(|(l, mask)| {
                let d = config.layer_width(l);
                DeletionLayer {
                    weight: Matrix::identity(d),
                    bias: Matrix::zeros(1, d),
                    mask: mask.into(),
                }
            })
            .collect();
        Ok(DeletionOperator { layers })
    }

    pub fn to_vars(&self, tape: &mut Tape, trainable: bool) -> Vec<OperatorVars> {
        self.layers
            .iter()
            .map(|l| {
                let (weight, bias) = if trainable {
                    (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone()))
                } else {
                    (tape.constant(l.weight.clone()), tape.constant(l.bias.clone()))
                };
                OperatorVars {
                    weight,
                    bias,
                    mask: Arc::clone(&l.mask),
                }
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// Final-layer node embeddings, tagged with where they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub matrix: Matrix,
    pub provenance: String,
}
