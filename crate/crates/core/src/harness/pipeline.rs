use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{emit_tables, AggregateReport};
use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::{
    activation_distance, delta_histogram, delta_p, mi_attack_auc, roc_auc, write_histogram_csv,
    DeltaP, EvalReport,
};
use crate::gnn::train;
use crate::graph::{sample_forget_set, sample_negative_edges, split_edges, Edge, EdgeSplit, Graph, UnlearnSplit};
use crate::seed;
use crate::unlearn::{gnndelete, gnndelete_ni, gradient_ascent, retrain, utu, Method, UnlearnedPredictor};

/// Contents of `run_<r>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    /// Set when a stage failed; `reports` is then empty.
    pub error: Option<String>,
    pub reports: Vec<EvalReport>,
}

/// Edges and negatives that every method of one (run, ratio) is scored on.
#[derive(Clone, Debug)]
pub struct EvalSets<'a> {
    pub split: &'a EdgeSplit,
    pub usplit: &'a UnlearnSplit,
    /// Same size as the retain set.
    pub retain_neg: &'a [Edge],
    /// Same size as the forget set; also the MI-attack nonmembers.
    pub forget_neg: &'a [Edge],
}

/// Scores `pred` and compares it with the retrained `reference`.
pub fn evaluate(
    pred: &UnlearnedPredictor,
    reference: &UnlearnedPredictor,
    sets: &EvalSets<'_>,
    seed: u64,
) -> Result<(EvalReport, DeltaP)> {
    let auc = |pos: &[Edge], neg: &[Edge]| -> Result<f64> {
        roc_auc(&pred.predict(pos)?, &pred.predict(neg)?)
    };
    let forget = &sets.usplit.forget;
    let (forget_auc, act, mi_u, mi_r) = if forget.is_empty() {
        (None, None, None, None)
    } else {
        (
            Some(auc(forget, sets.forget_neg)?),
            Some(activation_distance(pred, reference, forget)?),
            Some(mi_attack_auc(pred, forget, sets.forget_neg)?),
            Some(mi_attack_auc(reference, forget, sets.forget_neg)?),
        )
    };
    let dp = delta_p(pred, reference, &sets.usplit.retain)?;
    let report = EvalReport {
        method: pred.method.id().to_string(),
        seed,
        forget_ratio: sets.usplit.ratio,
        forget_size: forget.len(),
        test_auc: auc(&sets.split.test_pos, &sets.split.test_neg)?,
        retain_auc: auc(&sets.usplit.retain, sets.retain_neg)?,
        forget_auc,
        activation_distance: act,
        mi_auc_unlearned: mi_u,
        mi_auc_retrained: mi_r,
        mi_gap: mi_u.zip(mi_r).map(|(u, r)| (u - r).abs()),
        delta_p_mean: dp.mean,
        delta_p_negative_fraction: dp.negative_fraction,
        diverged: pred.diverged,
        unlearn_wall_time: pred.wall_time,
    };
    Ok((report, dp))
}

/// Non-edges for retain/forget AUC and the MI attack: `|train_pos|`
/// retain negatives followed by `forget` forget negatives. Disjoint from
/// every edge and from the validation and test negatives.
pub fn evaluation_negatives(graph: &Graph, split: &EdgeSplit, forget: usize, seed: u64) -> Result<Vec<Edge>> {
    let exclude: Vec<Edge> = split.val_neg.iter().chain(&split.test_neg).copied().collect();
    sample_negative_edges(
        graph,
        split.train_pos.len() + forget,
        &exclude,
        seed::derive(seed, &[seed::EVAL_NEG]),
    )
}

/// Forget set for `ratio` under run seed `seed`.
pub fn forget_split(split: &EdgeSplit, ratio: f64, seed: u64) -> Result<UnlearnSplit> {
    sample_forget_set(split, ratio, seed::derive(seed, &[seed::FORGET, ratio.to_bits()]))
}

/// Per-edge Δp of one (method, ratio) cell of a run, for histograms.
type Deltas = Vec<(Method, f64, Vec<f64>)>;

fn forget_size(ratio: f64, train: usize) -> usize {
    (ratio * train as f64 + 0.5).floor() as usize
}

/// Everything for run seed `seed`: build, split, train, then every
/// (ratio, method) cell against one retrained reference per ratio.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<EvalReport>, Deltas)> {
    let graph = cfg.build_graph(seed)?;
    let split = split_edges(&graph, cfg.train_frac, cfg.val_frac, seed::derive(seed, &[seed::SPLIT]))?;
    let model_cfg = cfg.model_config();
    let tcfg = cfg.train_config(seed::derive(seed, &[seed::TRAIN]));
    let model = Arc::new(train(&model_cfg, &graph, &split, &tcfg)?);
    let train_graph = split.train_graph(&graph)?;

    let n_train = split.train_pos.len();
    let max_forget = cfg
        .forget_ratios
        .iter()
        .map(|&r| forget_size(r, n_train))
        .max()
        .unwrap_or(0);
    let pool = evaluation_negatives(&graph, &split, max_forget, seed)?;
    let (retain_pool, forget_pool) = pool.split_at(n_train);

    let mut reports = Vec::new();
    let mut deltas = Vec::new();
    for &ratio in &cfg.forget_ratios {
        let usplit = forget_split(&split, ratio, seed)?;
        let sets = EvalSets {
            split: &split,
            usplit: &usplit,
            retain_neg: &retain_pool[..usplit.retain.len()],
            forget_neg: &forget_pool[..usplit.forget.len()],
        };
        let reference = retrain(&model_cfg, &graph, &split, &usplit, &tcfg)?;
        for &method in &cfg.methods {
            let pred = match method {
                Method::Retrain => None,
                _ => Some(apply(method, cfg, &model, &train_graph, &usplit, seed, ratio)?),
            };
            let pred = pred.as_ref().unwrap_or(&reference);
            let (report, dp) = evaluate(pred, &reference, &sets, seed)?;
            reports.push(report);
            deltas.push((method, ratio, dp.per_edge));
        }
    }
    Ok((reports, deltas))
}

/// Runs one unlearning method other than `retrain` on a trained model.
pub fn apply(
    method: Method,
    cfg: &ExperimentConfig,
    model: &Arc<crate::gnn::Model>,
    train_graph: &Graph,
    usplit: &UnlearnSplit,
    seed: u64,
    ratio: f64,
) -> Result<UnlearnedPredictor> {
    let pair_seed = seed::derive(seed, &[seed::RANDOM_PAIRS, ratio.to_bits()]);
    match method {
        Method::Utu => utu(model, train_graph, usplit),
        Method::GradAscent => gradient_ascent(model, train_graph, usplit, &cfg.grad_ascent_config()),
        Method::GnnDelete => gnndelete(model, train_graph, usplit, &cfg.gnndelete_config(pair_seed)),
        Method::GnnDeleteNi => gnndelete_ni(model, train_graph, usplit, &cfg.gnndelete_config(pair_seed)),
        Method::Retrain | Method::Original => Err(Error::invalid(format!("{method} is not applied to a trained model"))),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    std::io::Write::write_all(&mut out, b"\n")?;
    Ok(())
}

/// Runs the whole sweep and writes its reports under `cfg.output_dir`:
/// `run_<r>.json`, `aggregate.json`, the CSV tables and
/// `hist_<method>_<ratio>.csv`.
///
/// Runs execute in parallel and share nothing. A failing run is recorded in
/// its report and the aggregate, and the sweep carries on.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let outcomes: Vec<(RunReport, Deltas)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.base_seed.wrapping_add(run as u64);
            match run_single(cfg, seed) {
                Ok((reports, deltas)) => (
                    RunReport {
                        run,
                        seed,
                        error: None,
                        reports,
                    },
                    deltas,
                ),
                Err(e) => (
                    RunReport {
                        run,
                        seed,
                        error: Some(e.to_string()),
                        reports: Vec::new(),
                    },
                    Vec::new(),
                ),
            }
        })
        .collect();

    for (report, _) in &outcomes {
        write_json(&cfg.output_dir.join(format!("run_{}.json", report.run)), report)?;
    }
    let runs: Vec<RunReport> = outcomes.iter().map(|(r, _)| r.clone()).collect();
    let agg = AggregateReport::from_runs(&cfg.methods, &cfg.forget_ratios, &runs);
    write_json(&cfg.output_dir.join("aggregate.json"), &agg)?;
    emit_tables(&agg, &cfg.output_dir)?;

    let mut pooled: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (_, deltas) in &outcomes {
        for (method, ratio, d) in deltas {
            let mi = cfg.methods.iter().position(|m| m == method).expect("configured method");
            let ri = cfg.forget_ratios.iter().position(|r| r == ratio).expect("configured ratio");
            pooled.entry((mi, ri)).or_default().extend(d);
        }
    }
    for ((mi, ri), d) in &pooled {
        let bins = delta_histogram(d, cfg.histogram_bin_width)?;
        let name = format!("hist_{}_{}.csv", cfg.methods[*mi], cfg.forget_ratios[*ri]);
        write_histogram_csv(&bins, BufWriter::new(File::create(cfg.output_dir.join(name))?))?;
    }
    Ok(agg)
}
