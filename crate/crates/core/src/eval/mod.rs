//! Metrics for link prediction and unlearning.
//!
//! * [`roc_auc`]: Mann–Whitney AUC with ties counted as one half.
//! * [`js_divergence`]: Jensen–Shannon divergence of two Bernoulli
//!   distributions, base 2, so it lies in `[0, 1]`.
//! * [`activation_distance`]: mean JS divergence between two predictors on
//!   the forget set.
//! * [`mi_attack_auc`]: a score-threshold membership-inference attack, forget
//!   edges against never-seen non-edges.
//! * [`delta_p`]: per-edge change in predicted probability on the retain set;
//!   negative values are over-forgetting.
//! * [`delta_histogram`]: fixed-range histogram of those changes.

mod report;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::unlearn::UnlearnedPredictor;

pub use report::EvalReport;

/// Converts a Mann–Whitney count into an AUC.
///
/// `twice_u` is `2·#{pos > neg} + #{pos = neg}` over all `n_pos · n_neg`
/// pairs. The smaller of the two complementary fractions is divided out
/// first so that `auc(a, b) + auc(b, a)` is exactly 1 in floating point.
pub fn auc_from_count(twice_u: u128, n_pos: usize, n_neg: usize) -> f64 {
    let total = 2 * n_pos as u128 * n_neg as u128;
    let other = total - twice_u;
    if twice_u <= other {
        twice_u as f64 / total as f64
    } else {
        1.0 - other as f64 / total as f64
    }
}

/// ROC-AUC of `pos` scores against `neg` scores, `O((n + m) log(n + m))`.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("roc_auc needs at least one positive and one negative score"));
    }
    // -0.0 and 0.0 must tie.
    let norm = |x: f64| if x == 0.0 { 0.0 } else { x };
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (norm(s), true))
        .chain(neg.iter().map(|&s| (norm(s), false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let value = all[i].0;
        let (mut group_pos, mut group_neg) = (0u128, 0u128);
        while i < all.len() && all[i].0.total_cmp(&value).is_eq() {
            if all[i].1 {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            i += 1;
        }
        twice_u += group_pos * (2 * neg_below + group_neg);
        neg_below += group_neg;
    }
    Ok(auc_from_count(twice_u, pos.len(), neg.len()))
}

fn entropy_term(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).log2()
    }
}

/// JS divergence between Bernoulli(`p`) and Bernoulli(`q`) in bits.
pub fn js_divergence(p: f64, q: f64) -> f64 {
    let m = 0.5 * (p + q);
    let kl_p = entropy_term(p, m) + entropy_term(1.0 - p, 1.0 - m);
    let kl_q = entropy_term(q, m) + entropy_term(1.0 - q, 1.0 - m);
    (0.5 * (kl_p + kl_q)).clamp(0.0, 1.0)
}

/// Mean JS divergence between matching probabilities.
pub fn mean_js(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() || p.len() != q.len() {
        return Err(Error::invalid(format!(
            "mean_js needs equal non-empty inputs, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| js_divergence(a, b)).sum::<f64>() / p.len() as f64)
}

pub fn activation_distance(
    unlearned: &UnlearnedPredictor,
    retrained: &UnlearnedPredictor,
    forget: &[Edge],
) -> Result<f64> {
    if forget.is_empty() {
        return Err(Error::invalid("activation distance needs forget edges"));
    }
    mean_js(&unlearned.predict(forget)?, &retrained.predict(forget)?)
}

/// AUC of the attack that calls a pair a training member when its predicted
/// probability is high.
pub fn mi_attack_auc(pred: &UnlearnedPredictor, members: &[Edge], nonmembers: &[Edge]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::invalid("membership inference needs member edges"));
    }
    roc_auc(&pred.predict(members)?, &pred.predict(nonmembers)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaP {
    pub per_edge: Vec<f64>,
    pub mean: f64,
    pub negative_fraction: f64,
}

impl DeltaP {
    pub fn from_probabilities(unlearned: &[f64], reference: &[f64]) -> Result<Self> {
        if unlearned.is_empty() || unlearned.len() != reference.len() {
            return Err(Error::invalid(format!(
                "delta_p needs equal non-empty inputs, got {} and {}",
                unlearned.len(),
                reference.len()
            )));
        }
        let per_edge: Vec<f64> = unlearned.iter().zip(reference).map(|(u, r)| u - r).collect();
        let n = per_edge.len() as f64;
        Ok(DeltaP {
            mean: per_edge.iter().sum::<f64>() / n,
            negative_fraction: per_edge.iter().filter(|&&d| d < 0.0).count() as f64 / n,
            per_edge,
        })
    }
}

/// `Δp_ij = p_unlearned(i, j) - p_reference(i, j)` over the retain set.
pub fn delta_p(
    unlearned: &UnlearnedPredictor,
    reference: &UnlearnedPredictor,
    retain: &[Edge],
) -> Result<DeltaP> {
    if retain.is_empty() {
        return Err(Error::invalid("delta_p needs retain edges"));
    }
    DeltaP::from_probabilities(&unlearned.predict(retain)?, &reference.predict(retain)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

/// Counts `deltas` into half-open bins `[k·w, (k+1)·w)` covering `[-1, 1]`.
/// Values outside the range (including exactly 1) go to the nearest end bin.
pub fn delta_histogram(deltas: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    let per_side = (1.0 / bin_width - 1e-9).ceil() as i64;
    let mut bins: Vec<HistogramBin> = (-per_side..per_side)
        .map(|k| HistogramBin {
            left: k as f64 * bin_width,
            right: (k + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &d in deltas {
        let k = ((d / bin_width).floor() as i64).clamp(-per_side, per_side - 1);
        bins[(k + per_side) as usize].count += 1;
    }
    Ok(bins)
}

pub fn write_histogram_csv(bins: &[HistogramBin], mut out: impl Write) -> Result<()> {
    writeln!(out, "bin_left,bin_right,count")?;
    for b in bins {
        writeln!(out, "{},{},{}", b.left, b.right, b.count)?;
    }
    Ok(())
}
