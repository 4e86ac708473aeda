use std::sync::Arc;

use rand::Rng as _;

use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::matrix::Matrix;
use crate::seed;

/// `count` uniformly random node pairs `(p, q)` with `p != q`.
pub fn sample_random_pairs(num_nodes: usize, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if count > 0 && num_nodes < 2 {
        return Err(Error::invalid("random pairs need at least two nodes"));
    }
    let mut rng = seed::rng(seed);
    Ok((0..count)
        .map(|_| {
            let p = rng.random_range(0..num_nodes);
            let mut q = rng.random_range(0..num_nodes - 1);
            if q >= p {
                q += 1;
            }
            (p, q)
        })
        .collect())
}

fn gather_constant(rows: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), rows.cols());
    for (i, &r) in idx.iter().enumerate() {
        out.row_mut(i).copy_from_slice(rows.row(r));
    }
    out
}

fn concat(a: Matrix, b: Matrix) -> Matrix {
    let (n, da, db) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, da + db);
    for i in 0..n {
        out.row_mut(i)[..da].copy_from_slice(a.row(i));
        out.row_mut(i)[da..].copy_from_slice(b.row(i));
    }
    out
}

/// Deleted-edge consistency: pulls the concatenated endpoint embeddings of
/// each forget edge toward those of a random node pair under the original
/// embeddings `original`.
pub fn dec_loss(
    tape: &mut Tape,
    h: Var,
    original: &Matrix,
    forget: &[Edge],
    pairs: &[(usize, usize)],
) -> Result<Var> {
    if forget.is_empty() || forget.len() != pairs.len() {
        return Err(Error::invalid(format!(
            "{} forget edges and {} random pairs",
            forget.len(),
            pairs.len()
        )));
    }
    let us: Arc<[usize]> = forget.iter().map(|e| e.0).collect();
    let vs: Arc<[usize]> = forget.iter().map(|e| e.1).collect();
    let hu = tape.gather_rows(h, &us)?;
    let hv = tape.gather_rows(h, &vs)?;
    let cat = tape.concat_cols(hu, hv)?;
    let ps: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let qs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let target = concat(gather_constant(original, &ps), gather_constant(original, &qs));
    let target = tape.constant(target);
    tape.mse(cat, target)
}

/// Neighborhood influence: keeps the embeddings of `nodes` close to the
/// reference embeddings `original`.
pub fn ni_loss(tape: &mut Tape, h: Var, original: &Matrix, nodes: &Arc<[usize]>) -> Result<Var> {
    if nodes.is_empty() {
        return Err(Error::invalid("neighborhood loss over an empty node set"));
    }
    let rows = tape.gather_rows(h, nodes)?;
    let target = tape.constant(gather_constant(original, nodes));
    tape.mse(rows, target)
}
