//! Method-level examples on one desk SBM instance (GCN, seed 0, 5% forget).

use std::sync::{Arc, OnceLock};

use edge_unlearn::eval::EvalReport;
use edge_unlearn::gnn::train;
use edge_unlearn::graph::split_edges;
use edge_unlearn::harness::{apply, evaluate, evaluation_negatives, forget_split, EvalSets, ExperimentConfig};
use edge_unlearn::seed;
use edge_unlearn::unlearn::{retrain, Method, UnlearnedPredictor};

const SEED: u64 = 0;
const RATIO: f64 = 0.05;

struct Desk {
    original: EvalReport,
    reports: Vec<EvalReport>,
}

impl Desk {
    fn get(&self, method: Method) -> &EvalReport {
        self.reports.iter().find(|r| r.method == method.id()).unwrap()
    }
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let graph = cfg.build_graph(SEED).unwrap();
        let split = split_edges(&graph, cfg.train_frac, cfg.val_frac, seed::derive(SEED, &[seed::SPLIT])).unwrap();
        let model_cfg = cfg.model_config();
        let tcfg = cfg.train_config(seed::derive(SEED, &[seed::TRAIN]));
        let model = Arc::new(train(&model_cfg, &graph, &split, &tcfg).unwrap());
        let train_graph = split.train_graph(&graph).unwrap();
        let usplit = forget_split(&split, RATIO, SEED).unwrap();
        let pool = evaluation_negatives(&graph, &split, usplit.forget.len(), SEED).unwrap();
        let (retain_pool, forget_pool) = pool.split_at(split.train_pos.len());
        let sets = EvalSets {
            split: &split,
            usplit: &usplit,
            retain_neg: &retain_pool[..usplit.retain.len()],
            forget_neg: forget_pool,
        };
        let reference = retrain(&model_cfg, &graph, &split, &usplit, &tcfg).unwrap();
        let original = UnlearnedPredictor::original(Arc::clone(&model), train_graph.clone());
        let mut reports = vec![evaluate(&reference, &reference, &sets, SEED).unwrap().0];
        for method in [Method::GradAscent, Method::GnnDelete, Method::GnnDeleteNi, Method::Utu] {
            let pred = apply(method, &cfg, &model, &train_graph, &usplit, SEED, RATIO).unwrap();
            reports.push(evaluate(&pred, &reference, &sets, SEED).unwrap().0);
        }
        Desk {
            original: evaluate(&original, &reference, &sets, SEED).unwrap().0,
            reports,
        }
    })
}

#[test]
fn retrain_keeps_retained_edge_auc() {
    let d = desk();
    let re = d.get(Method::Retrain).retain_auc;
    assert!((re - d.original.retain_auc).abs() <= 0.02, "retrain {re} original {}", d.original.retain_auc);
}

#[test]
fn grad_ascent_collapses_test_auc() {
    let d = desk();
    let ga = d.get(Method::GradAscent).test_auc;
    assert!(d.original.test_auc - ga > 0.05, "grad ascent {ga} original {}", d.original.test_auc);
}

#[test]
fn gnndelete_pushes_retained_probabilities_down() {
    let d = desk();
    let (del, utu) = (d.get(Method::GnnDelete).delta_p_mean, d.get(Method::Utu).delta_p_mean);
    assert!(del < utu, "gnndelete {del} utu {utu}");
}

#[test]
fn gnndelete_degrades_most_retained_edges() {
    let frac = desk().get(Method::GnnDelete).delta_p_negative_fraction;
    assert!(frac > 0.75, "{frac}");
}

#[test]
fn ni_variant_keeps_retain_auc() {
    let d = desk();
    let (ni, del) = (d.get(Method::GnnDeleteNi).retain_auc, d.get(Method::GnnDelete).retain_auc);
    assert!(ni >= del, "ni {ni} gnndelete {del}");
}

#[test]
fn utu_tracks_retrain_on_forget_edges() {
    let d = desk();
    let utu = d.get(Method::Utu).activation_distance.unwrap();
    let ga = d.get(Method::GradAscent).activation_distance.unwrap();
    assert!(utu < 0.1 && utu < ga, "utu {utu} grad ascent {ga}");
}

#[test]
fn utu_mi_gap_below_gnndelete() {
    let d = desk();
    let utu = d.get(Method::Utu).mi_gap.unwrap();
    let del = d.get(Method::GnnDelete).mi_gap.unwrap();
    assert!(utu < del, "utu {utu} gnndelete {del}");
}

#[test]
fn utu_is_fast() {
    let r = desk().get(Method::Utu);
    let per_thousand = r.unlearn_wall_time / r.forget_size as f64 * 1000.0;
    assert!(per_thousand < 1e-3, "{per_thousand}s per 1000 edges");
}

#[test]
fn original_model_is_not_the_reference() {
    let d = desk();
    assert!(d.original.forget_auc.is_some());
    assert_ne!(d.original.delta_p_mean, 0.0);
}
