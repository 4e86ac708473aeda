//! Plain-text model checkpoints.
//!
//! ```text
//! # edge-unlearn checkpoint v1
//! backbone gcn
//! num_layers 2
//! in_dim 32
//! hidden_dim 64
//! out_dim 64
//! gat_heads 1
//! gat_slope 2e-1
//! gin_eps 0e0
//! tensors 4
//! tensor 32 64
//! <32 lines of 64 space-separated values>
//! tensor 1 64
//! ...
//! ```
//!
//! Tensors follow [`Model::tensors`] order and are stored row-major, one row
//! per line. Values use Rust's shortest round-trip exponent form, so a
//! save/load cycle reproduces every bit.
//!
//! Deletion operators use the same tensor blocks:
//!
//! ```text
//! # edge-unlearn deletion operator v1
//! nodes 1000
//! layers 2
//! mask 3 4 17 250
//! tensor 64 64
//! ...
//! tensor 1 64
//! ...
//! ```
//!
//! where each `mask` line gives the count and then the ids of the masked
//! nodes for the following layer.

use std::io::{BufRead, BufReader, Read, Write};

use super::{DeletionLayer, DeletionOperator, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MODEL_MAGIC: &str = "# edge-unlearn checkpoint v1";
const OPERATOR_MAGIC: &str = "# edge-unlearn deletion operator v1";

fn write_tensor(out: &mut impl Write, m: &Matrix) -> Result<()> {
    writeln!(out, "tensor {} {}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_checkpoint(model: &Model, mut out: impl Write) -> Result<()> {
    let c = &model.config;
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(out, "backbone {}", c.backbone.name().to_ascii_lowercase())?;
    writeln!(out, "num_layers {}", c.num_layers)?;
    writeln!(out, "in_dim {}", model.in_dim)?;
    writeln!(out, "hidden_dim {}", c.hidden_dim)?;
    writeln!(out, "out_dim {}", c.out_dim)?;
    writeln!(out, "gat_heads {}", c.gat_heads)?;
    writeln!(out, "gat_slope {:e}", c.gat_slope)?;
    writeln!(out, "gin_eps {:e}", c.gin_eps)?;
    let tensors = model.tensors();
    writeln!(out, "tensors {}", tensors.len())?;
    for t in tensors {
        write_tensor(&mut out, t)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line_no: usize,
}

impl<R: Read> Lines<R> {
    fn new(r: R) -> Self {
        Lines {
            inner: BufReader::new(r).lines(),
            line_no: 0,
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.line_no))
    }

    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key} <value>`, got {line:?}")))?;
        value
            .trim()
            .parse()
            .map_err(|_| self.err(format!("bad value for {key}: {value:?}")))
    }

    fn tensor(&mut self) -> Result<Matrix> {
        let header = self.next_line()?;
        let dims: Vec<usize> = header
            .strip_prefix("tensor ")
            .map(|rest| rest.split_whitespace().filter_map(|s| s.parse().ok()).collect())
            .unwrap_or_default();
        let [rows, cols] = dims[..] else {
            return Err(self.err(format!("expected `tensor <rows> <cols>`, got {header:?}")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| self.err(e))?;
            if row.len() != cols {
                return Err(self.err(format!("expected {cols} values, got {}", row.len())));
            }
            data.extend(row);
        }
        Matrix::from_vec(rows, cols, data)
    }

    fn expect(&mut self, magic: &str) -> Result<()> {
        let line = self.next_line()?;
        if line.trim() != magic {
            return Err(self.err(format!("expected header {magic:?}")));
        }
        Ok(())
    }
}

pub fn read_checkpoint(input: impl Read) -> Result<Model> {
    let mut lines = Lines::new(input);
    lines.expect(MODEL_MAGIC)?;
    let backbone: String = lines.field("backbone")?;
    let config = ModelConfig {
        backbone: backbone.parse()?,
        num_layers: lines.field("num_layers")?,
        hidden_dim: 0,
        out_dim: 0,
        gat_heads: 0,
        gat_slope: 0.0,
        gin_eps: 0.0,
    };
    let in_dim: usize = lines.field("in_dim")?;
    let config = ModelConfig {
        hidden_dim: lines.field("hidden_dim")?,
        out_dim: lines.field("out_dim")?,
        gat_heads: lines.field("gat_heads")?,
        gat_slope: lines.field("gat_slope")?,
        gin_eps: lines.field("gin_eps")?,
        ..config
    };
    let count: usize = lines.field("tensors")?;
    let mut model = Model::init(&config, in_dim, 0)?;
    if count != model.tensors().len() {
        return Err(lines.err(format!(
            "{count} tensors listed, configuration needs {}",
            model.tensors().len()
        )));
    }
    for slot in model.tensors_mut() {
        let t = lines.tensor()?;
        if t.shape() != slot.shape() {
            return Err(lines.err(format!("tensor shape {:?}, expected {:?}", t.shape(), slot.shape())));
        }
        *slot = t;
    }
    Ok(model)
}

pub fn write_deletion_ops(op: &DeletionOperator, mut out: impl Write) -> Result<()> {
    writeln!(out, "{OPERATOR_MAGIC}")?;
    let nodes = op.layers.first().map_or(0, |l| l.mask.len());
    writeln!(out, "nodes {nodes}")?;
    writeln!(out, "layers {}", op.layers.len())?;
    for layer in &op.layers {
        let ids: Vec<String> = layer
            .mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i.to_string())
            .collect();
        write!(out, "mask {}", ids.len())?;
        for id in &ids {
            write!(out, " {id}")?;
        }
        writeln!(out)?;
        write_tensor(&mut out, &layer.weight)?;
        write_tensor(&mut out, &layer.bias)?;
    }
    Ok(())
}

pub fn read_deletion_ops(input: impl Read) -> Result<DeletionOperator> {
    let mut lines = Lines::new(input);
    lines.expect(OPERATOR_MAGIC)?;
    let nodes: usize = lines.field("nodes")?;
    let count: usize = lines.field("layers")?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next_line()?;
        let ids: Vec<usize> = line
            .strip_prefix("mask ")
            .ok_or_else(|| lines.err("expected mask line"))?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| lines.err(e))?;
        if ids.is_empty() || ids[0] != ids.len() - 1 {
            return Err(lines.err("mask count does not match the ids listed"));
        }
        let mut mask = vec![false; nodes];
        for &id in &ids[1..] {
            *mask.get_mut(id).ok_or_else(|| lines.err(format!("node {id} out of range")))? = true;
        }
        let weight = lines.tensor()?;
        let bias = lines.tensor()?;
        if weight.rows() != weight.cols() || bias.shape() != (1, weight.cols()) {
            return Err(lines.err("deletion layer must be square with a matching bias row"));
        }
        layers.push(DeletionLayer {
            weight,
            bias,
            mask: mask.into(),
        });
    }
    Ok(DeletionOperator { layers })
}
