//! Edge unlearning for GNN link predictors.
//!
//! The crate trains small GCN/GAT/GIN link predictors with its own
//! reverse-mode engine, removes training edges with five unlearning
//! methods, and measures utility, unlearning efficacy and over-forgetting.
//!
//! ```
//! use edge_unlearn::graph::{generate_sbm, generate_features, split_edges, sample_forget_set, SbmParams};
//! use edge_unlearn::gnn::{train, ModelConfig, TrainConfig};
//! use edge_unlearn::graph::Backbone;
//! use edge_unlearn::unlearn::utu;
//! use std::sync::Arc;
//!
//! let g = generate_sbm(SbmParams { blocks: 2, nodes_per_block: 20, p_in: 0.3, p_out: 0.02 }, 1)?;
//! let g = generate_features(&g, 8, 2)?;
//! let split = split_edges(&g, 0.9, 0.05, 3)?;
//! let model = Arc::new(train(&ModelConfig::new(Backbone::Gcn, 16, 16), &g, &split, &TrainConfig { epochs: 20, ..TrainConfig::default() })?);
//!
//! let train_graph = split.train_graph(&g)?;
//! let forget = sample_forget_set(&split, 0.05, 4)?;
//! let unlearned = utu(&model, &train_graph, &forget)?;
//! assert_eq!(unlearned.inference_graph.num_edges(), train_graph.num_edges() - forget.forget.len());
//! # Ok::<(), edge_unlearn::Error>(())
//! ```

pub mod diff;
mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod seed;
pub mod unlearn;

pub use error::{Error, Result};
pub use matrix::Matrix;
