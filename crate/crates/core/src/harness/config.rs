use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{ModelConfig, TrainConfig};
use crate::graph::{
    generate_features, generate_sbm, load_edge_list, load_features, Backbone, Graph, SbmParams,
};
use crate::seed;
use crate::unlearn::{BranchGraph, GnnDeleteConfig, GradAscentConfig, Method};

/// Everything one sweep needs. Serialized as a flat JSON object whose keys
/// are exactly these field names; unknown keys are rejected.
///
/// The graph comes from `edge_list` when set, otherwise from the SBM
/// parameters. Features come from `features` when set, otherwise they are
/// drawn as standard normals of width `feature_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sbm_blocks: usize,
    pub sbm_nodes_per_block: usize,
    pub sbm_p_in: f64,
    pub sbm_p_out: f64,
    pub edge_list: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub feature_dim: usize,
    pub train_frac: f64,
    pub val_frac: f64,

    pub backbone: Backbone,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub gat_heads: usize,
    pub gat_slope: f64,
    pub gin_eps: f64,

    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub negatives_per_positive: usize,
    pub patience: usize,

    pub forget_ratios: Vec<f64>,
    pub methods: Vec<Method>,

    pub gnndelete_lambda: f64,
    pub gnndelete_epochs: usize,
    pub gnndelete_learning_rate: f64,
    pub gnndelete_branch_graph: BranchGraph,
    pub grad_ascent_steps: usize,
    pub grad_ascent_learning_rate: f64,

    pub histogram_bin_width: f64,
    pub runs: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let gnndelete = GnnDeleteConfig::default();
        ExperimentConfig {
            sbm_blocks: 4,
            sbm_nodes_per_block: 250,
            sbm_p_in: 0.05,
            sbm_p_out: 0.002,
            edge_list: None,
            features: None,
            feature_dim: 32,
            train_frac: 0.9,
            val_frac: 0.05,
            backbone: Backbone::Gcn,
            num_layers: 2,
            hidden_dim: 64,
            out_dim: 64,
            gat_heads: 1,
            gat_slope: 0.2,
            gin_eps: 0.0,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            beta1: train.beta1,
            beta2: train.beta2,
            adam_epsilon: train.adam_epsilon,
            negatives_per_positive: train.negatives_per_positive,
            patience: train.patience,
            forget_ratios: vec![0.001, 0.005, 0.01, 0.025, 0.05],
            methods: Method::ALL.to_vec(),
            gnndelete_lambda: gnndelete.lambda,
            gnndelete_epochs: gnndelete.epochs,
            gnndelete_learning_rate: gnndelete.learning_rate,
            gnndelete_branch_graph: gnndelete.branch_graph,
            grad_ascent_steps: 5,
            grad_ascent_learning_rate: train.learning_rate,
            histogram_bin_width: crate::eval::DEFAULT_BIN_WIDTH,
            runs: 5,
            base_seed: 0,
            output_dir: PathBuf::from("eub-output"),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(config_err("runs must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods must not be empty"));
        }
        if self.methods.contains(&Method::Original) {
            return Err(config_err("\"original\" is not an unlearning method"));
        }
        if let Some(r) = self.forget_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(config_err(format!("forget ratio {r} outside (0, 1]")));
        }
        if self.forget_ratios.is_empty() {
            return Err(config_err("forget_ratios must not be empty"));
        }
        if !(self.histogram_bin_width > 0.0) {
            return Err(config_err("histogram_bin_width must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gnndelete_lambda) {
            return Err(config_err("gnndelete_lambda must lie in [0, 1]"));
        }
        if self.edge_list.is_none() && (self.sbm_blocks == 0 || self.sbm_nodes_per_block == 0) {
            return Err(config_err("SBM needs at least one block and one node per block"));
        }
        if self.features.is_none() && self.feature_dim == 0 {
            return Err(config_err("feature_dim must be positive"));
        }
        self.model_config().validate().map_err(|e| config_err(e.to_string()))?;
        self.train_config(0).validate().map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn sbm(&self) -> SbmParams {
        SbmParams {
            blocks: self.sbm_blocks,
            nodes_per_block: self.sbm_nodes_per_block,
            p_in: self.sbm_p_in,
            p_out: self.sbm_p_out,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            backbone: self.backbone,
            num_layers: self.num_layers,
            hidden_dim: self.hidden_dim,
            out_dim: self.out_dim,
            gat_heads: self.gat_heads,
            gat_slope: self.gat_slope,
            gin_eps: self.gin_eps,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_epsilon: self.adam_epsilon,
            negatives_per_positive: self.negatives_per_positive,
            seed,
            patience: self.patience,
        }
    }

    pub fn gnndelete_config(&self, random_pair_seed: u64) -> GnnDeleteConfig {
        GnnDeleteConfig {
            lambda: self.gnndelete_lambda,
            epochs: self.gnndelete_epochs,
            learning_rate: self.gnndelete_learning_rate,
            random_pair_seed,
            branch_graph: self.gnndelete_branch_graph,
        }
    }

    pub fn grad_ascent_config(&self) -> GradAscentConfig {
        GradAscentConfig {
            steps: self.grad_ascent_steps,
            learning_rate: self.grad_ascent_learning_rate,
        }
    }

    /// The featured input graph for a run seed.
    pub fn build_graph(&self, run_seed: u64) -> Result<Graph> {
        let graph = match &self.edge_list {
            Some(path) => load_edge_list(path)?,
            None => generate_sbm(self.sbm(), seed::derive(run_seed, &[seed::GRAPH]))?,
        };
        match &self.features {
            Some(path) => graph.with_features(load_features(path)?),
            None => generate_features(&graph, self.feature_dim, seed::derive(run_seed, &[seed::FEATURES])),
        }
    }
}
