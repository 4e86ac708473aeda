//! Directional desk-scale criteria, computed from one sweep over three
//! backbones, five seeds and three forget ratios.

use std::sync::Arc;
use std::time::Instant;

use edge_unlearn::eval::EvalReport;
use edge_unlearn::gnn::{Model, ModelConfig};
use edge_unlearn::graph::{sample_forget_set, split_edges, Backbone};
use edge_unlearn::harness::{run_single, ExperimentConfig};
use edge_unlearn::unlearn::{utu, Method};

use crate::Outcome;

const SEEDS: u64 = 5;
const RATIOS: [f64; 3] = [0.001, 0.01, 0.05];
const HEADLINE_RATIO: f64 = 0.05;

pub struct Sweep {
    reports: Vec<(Backbone, EvalReport)>,
    failures: Vec<String>,
}

impl Sweep {
    pub fn run() -> Sweep {
        let mut reports = Vec::new();
        let mut failures = Vec::new();
        for backbone in Backbone::ALL {
            let cfg = ExperimentConfig {
                backbone,
                forget_ratios: RATIOS.to_vec(),
                ..ExperimentConfig::default()
            };
            for seed in 0..SEEDS {
                let start = Instant::now();
                match run_single(&cfg, seed) {
                    Ok((r, _)) => reports.extend(r.into_iter().map(|r| (backbone, r))),
                    Err(e) => failures.push(format!("{backbone} seed {seed}: {e}")),
                }
                eprintln!("  desk sweep {backbone} seed {seed}: {:.1}s", start.elapsed().as_secs_f64());
            }
        }
        Sweep { reports, failures }
    }

    /// Mean of `metric` over seeds for one cell.
    fn mean(&self, backbone: Backbone, method: Method, ratio: f64, metric: &str) -> f64 {
        let values: Vec<f64> = self
            .reports
            .iter()
            .filter(|(b, r)| *b == backbone && r.method == method.id() && r.forget_ratio == ratio)
            .filter_map(|(_, r)| r.metrics().into_iter().find(|(n, _)| *n == metric).and_then(|(_, v)| v))
            .collect();
        if values.len() as u64 != SEEDS {
            return f64::NAN;
        }
        values.iter().sum::<f64>() / values.len() as f64
    }

    fn with_failures(&self, parts: Vec<Outcome>) -> Outcome {
        let mut parts = parts;
        if !self.failures.is_empty() {
            parts.insert(0, Outcome::new(false, format!("failed runs: {}", self.failures.join(", "))));
        }
        Outcome::all(parts)
    }

    pub fn over_forgetting(&self) -> Outcome {
        let r = HEADLINE_RATIO;
        let parts = Backbone::ALL
            .into_iter()
            .flat_map(|b| {
                let auc_utu = self.mean(b, Method::Utu, r, "retain_auc");
                let auc_del = self.mean(b, Method::GnnDelete, r, "retain_auc");
                let dp_utu = self.mean(b, Method::Utu, r, "delta_p_mean");
                let dp_del = self.mean(b, Method::GnnDelete, r, "delta_p_mean");
                let neg_utu = self.mean(b, Method::Utu, r, "delta_p_negative_fraction");
                let neg_del = self.mean(b, Method::GnnDelete, r, "delta_p_negative_fraction");
                vec![
                    Outcome::new(
                        auc_utu >= auc_del + 0.01,
                        format!("{b} retain AUC utu {auc_utu:.4} vs gnndelete {auc_del:.4}"),
                    ),
                    Outcome::new(dp_utu > dp_del, format!("{b} mean dp utu {dp_utu:.4} vs gnndelete {dp_del:.4}")),
                    Outcome::new(
                        neg_del - neg_utu >= 0.10,
                        format!("{b} negative dp fraction gnndelete {neg_del:.3} vs utu {neg_utu:.3}"),
                    ),
                ]
            })
            .collect();
        self.with_failures(parts)
    }

    pub fn utility_proximity(&self) -> Outcome {
        let mut parts = Vec::new();
        for b in Backbone::ALL {
            for r in RATIOS {
                let utu = self.mean(b, Method::Utu, r, "test_auc");
                let re = self.mean(b, Method::Retrain, r, "test_auc");
                parts.push(Outcome::new(
                    (utu - re).abs() <= 0.02,
                    format!("{b} @{r}: utu {utu:.4} retrain {re:.4}"),
                ));
            }
        }
        self.with_failures(parts)
    }

    pub fn efficacy_proximity(&self) -> Outcome {
        let r = HEADLINE_RATIO;
        let parts = Backbone::ALL
            .into_iter()
            .flat_map(|b| {
                let gap_utu = self.mean(b, Method::Utu, r, "mi_gap");
                let gap_del = self.mean(b, Method::GnnDelete, r, "mi_gap");
                let act_utu = self.mean(b, Method::Utu, r, "activation_distance");
                let act_ga = self.mean(b, Method::GradAscent, r, "activation_distance");
                let auc_ga = self.mean(b, Method::GradAscent, r, "test_auc");
                let auc_re = self.mean(b, Method::Retrain, r, "test_auc");
                vec![
                    Outcome::new(gap_utu <= gap_del, format!("{b} MI gap utu {gap_utu:.4} vs gnndelete {gap_del:.4}")),
                    Outcome::new(
                        act_utu <= act_ga,
                        format!("{b} activation distance utu {act_utu:.4} vs grad_ascent {act_ga:.4}"),
                    ),
                    Outcome::new(
                        auc_ga <= auc_re - 0.05,
                        format!("{b} test AUC grad_ascent {auc_ga:.4} vs retrain {auc_re:.4}"),
                    ),
                ]
            })
            .collect();
        self.with_failures(parts)
    }

    pub fn cost(&self) -> Outcome {
        let r = HEADLINE_RATIO;
        let mut parts: Vec<Outcome> = Backbone::ALL
            .into_iter()
            .map(|b| {
                let t_utu = self.mean(b, Method::Utu, r, "unlearn_wall_time");
                let t_re = self.mean(b, Method::Retrain, r, "unlearn_wall_time");
                let t_del = self.mean(b, Method::GnnDelete, r, "unlearn_wall_time");
                Outcome::new(
                    t_utu < 0.01 * t_re && t_utu < 0.01 * t_del,
                    format!("{b} wall time utu {:.1}us, retrain {t_re:.2}s, gnndelete {t_del:.2}s", t_utu * 1e6),
                )
            })
            .collect();
        parts.extend(scaling());
        self.with_failures(parts)
    }
}

fn median_time(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[reps / 2]
}

/// UtU time against forget-set size and model size.
fn scaling() -> Vec<Outcome> {
    // Absolute slack for timer resolution and allocator noise.
    const FLOOR: f64 = 20e-6;
    const REPS: usize = 201;
    let cfg = ExperimentConfig::default();
    let graph = cfg.build_graph(0).unwrap();
    let split = split_edges(&graph, cfg.train_frac, cfg.val_frac, 1).unwrap();
    let train_graph = split.train_graph(&graph).unwrap();
    let n_train = split.train_pos.len() as f64;
    let model = Arc::new(Model::init(&cfg.model_config(), cfg.feature_dim, 0).unwrap());

    let sizes = [25usize, 50, 100, 200, 400];
    let times: Vec<f64> = sizes
        .iter()
        .map(|&k| {
            let usplit = sample_forget_set(&split, k as f64 / n_train, 2).unwrap();
            median_time(REPS, || {
                std::hint::black_box(utu(&model, &train_graph, &usplit).unwrap());
            })
        })
        .collect();
    let per_edge_base = times[0] / sizes[0] as f64;
    let linear = sizes
        .iter()
        .zip(&times)
        .all(|(&k, &t)| t <= 2.0 * per_edge_base * k as f64 + FLOOR);
    let growth = sizes
        .iter()
        .zip(&times)
        .map(|(k, t)| format!("{k}:{:.1}us", t * 1e6))
        .collect::<Vec<_>>()
        .join(" ");

    let usplit = sample_forget_set(&split, 100.0 / n_train, 3).unwrap();
    let by_dim: Vec<(usize, f64)> = [16usize, 64, 256]
        .into_iter()
        .map(|h| {
            let m = Arc::new(Model::init(&ModelConfig::new(cfg.backbone, h, h), cfg.feature_dim, 0).unwrap());
            let t = median_time(REPS, || {
                std::hint::black_box(utu(&m, &train_graph, &usplit).unwrap());
            });
            (m.num_parameters(), t)
        })
        .collect();
    let lo = by_dim.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let hi = by_dim.iter().map(|x| x.1).fold(0.0, f64::max);
    let flat = hi <= 2.0 * lo + FLOOR;
    let dims = by_dim
        .iter()
        .map(|(p, t)| format!("{p} params:{:.1}us", t * 1e6))
        .collect::<Vec<_>>()
        .join(" ");
    vec![
        Outcome::new(linear, format!("utu time by |forget| {growth}")),
        Outcome::new(flat, format!("utu time by model size {dims}")),
    ]
}
