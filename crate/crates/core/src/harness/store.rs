//! On-disk layout of CLI artifacts.
//!
//! A trained-model directory holds `model.ckpt`, `graph.txt` (the full
//! edge list), `features.csv`, `split.json` and `train.json` (the training
//! settings, reused by `retrain`). A predictor directory holds
//! `model.ckpt`, `graph.txt` (the inference graph), `features.csv`,
//! `meta.json` and, for the GNNDelete family, `deletion_ops.txt`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{
    read_checkpoint, read_deletion_ops, write_checkpoint, write_deletion_ops, Model, TrainConfig,
};
use crate::graph::{load_edge_list, load_features, write_edge_list, write_features, Edge, EdgeSplit, Graph};
use crate::unlearn::{Method, UnlearnedPredictor};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(out.flush()?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_graph(dir: &Path, graph: &Graph) -> Result<()> {
    let mut out = create(&dir.join("graph.txt"))?;
    write_edge_list(graph, &mut out)?;
    out.flush()?;
    let features = graph
        .features()
        .ok_or_else(|| Error::invalid("graph has no node features"))?;
    let mut out = create(&dir.join("features.csv"))?;
    write_features(features, &mut out)?;
    Ok(out.flush()?)
}

fn read_graph(dir: &Path) -> Result<Graph> {
    load_edge_list(dir.join("graph.txt"))?.with_features(load_features(dir.join("features.csv"))?)
}

fn write_model(dir: &Path, model: &Model) -> Result<()> {
    let mut out = create(&dir.join("model.ckpt"))?;
    write_checkpoint(model, &mut out)?;
    Ok(out.flush()?)
}

fn read_model(dir: &Path) -> Result<Model> {
    read_checkpoint(BufReader::new(File::open(dir.join("model.ckpt"))?))
}

/// A trained model with the data it was trained on.
#[derive(Clone, Debug)]
pub struct TrainedArtifacts {
    pub model: Model,
    pub graph: Graph,
    pub split: EdgeSplit,
    pub train: TrainConfig,
}

impl TrainedArtifacts {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_model(dir, &self.model)?;
        write_graph(dir, &self.graph)?;
        write_json(&dir.join("split.json"), &self.split)?;
        write_json(&dir.join("train.json"), &self.train)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(TrainedArtifacts {
            model: read_model(dir)?,
            graph: read_graph(dir)?,
            split: read_json(&dir.join("split.json"))?,
            train: read_json(&dir.join("train.json"))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorMeta {
    pub method: Method,
    pub wall_time: f64,
    pub diverged: bool,
    pub forget_ratio: f64,
    pub forget: Vec<Edge>,
}

pub fn save_predictor(dir: &Path, pred: &UnlearnedPredictor, forget_ratio: f64, forget: &[Edge]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_model(dir, &pred.model)?;
    write_graph(dir, &pred.inference_graph)?;
    let ops_path = dir.join("deletion_ops.txt");
    match &pred.deletion_ops {
        Some(ops) => {
            let mut out = create(&ops_path)?;
            write_deletion_ops(ops, &mut out)?;
            out.flush()?;
        }
        None if ops_path.exists() => fs::remove_file(&ops_path)?,
        None => {}
    }
    write_json(
        &dir.join("meta.json"),
        &PredictorMeta {
            method: pred.method,
            wall_time: pred.wall_time,
            diverged: pred.diverged,
            forget_ratio,
            forget: forget.to_vec(),
        },
    )
}

pub fn load_predictor(dir: &Path) -> Result<(UnlearnedPredictor, PredictorMeta)> {
    let meta: PredictorMeta = read_json(&dir.join("meta.json"))?;
    let ops_path = dir.join("deletion_ops.txt");
    let ops = if ops_path.exists() {
        Some(read_deletion_ops(BufReader::new(File::open(ops_path)?))?)
    } else {
        None
    };
    let mut pred = UnlearnedPredictor::new(
        meta.method,
        Arc::new(read_model(dir)?),
        read_graph(dir)?,
        ops,
        meta.wall_time,
    );
    pred.diverged = meta.diverged;
    Ok((pred, meta))
}
