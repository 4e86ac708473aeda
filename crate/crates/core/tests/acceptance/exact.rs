//! Criteria with exact answers: bit-identity, locality, gradients and
//! metric oracles.

use std::collections::VecDeque;
use std::sync::Arc;

use edge_unlearn::diff::{grad_check, grad_check_many, Tape};
use edge_unlearn::eval::{delta_p, js_divergence, roc_auc};
use edge_unlearn::gnn::{encode, fit, lp_loss, train, Layer, Model, ModelConfig, OperatorVars, TrainConfig};
use edge_unlearn::graph::{
    generate_features, generate_sbm, sample_forget_set, split_edges, to_message_structure, Backbone,
    Edge, Graph, SbmParams, UnlearnSplit,
};
use edge_unlearn::harness::ExperimentConfig;
use edge_unlearn::matrix::Matrix;
use edge_unlearn::unlearn::{
    dec_loss, deletion_masks, gnndelete, gnndelete_ni, ni_loss, sample_random_pairs, utu,
    DeleteObjective, DeletionOperator, GnnDeleteConfig, UnlearnedPredictor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

const EPS: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-5;

fn bits(p: &[f64]) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

pub fn identity_chain() -> Outcome {
    let parts = Backbone::ALL
        .into_iter()
        .map(|backbone| {
            let cfg = ExperimentConfig {
                backbone,
                epochs: 50,
                ..ExperimentConfig::default()
            };
            let graph = cfg.build_graph(0).unwrap();
            let split = split_edges(&graph, cfg.train_frac, cfg.val_frac, 1).unwrap();
            let model = Arc::new(train(&cfg.model_config(), &graph, &split, &cfg.train_config(2)).unwrap());
            let train_graph = split.train_graph(&graph).unwrap();
            let edges: Vec<Edge> = split
                .train_pos
                .iter()
                .chain(&split.val_pos)
                .chain(&split.test_pos)
                .chain(&split.val_neg)
                .chain(&split.test_neg)
                .copied()
                .collect();

            let original = UnlearnedPredictor::original(Arc::clone(&model), train_graph.clone());
            let empty = UnlearnSplit {
                forget: Vec::new(),
                retain: split.train_pos.clone(),
                ratio: 0.0,
            };
            let p_orig = original.predict(&edges).unwrap();
            let p_empty = utu(&model, &train_graph, &empty).unwrap().predict(&edges).unwrap();

            let usplit = sample_forget_set(&split, 0.05, 3).unwrap();
            let zero = GnnDeleteConfig {
                epochs: 0,
                ..GnnDeleteConfig::default()
            };
            let p_utu = utu(&model, &train_graph, &usplit).unwrap().predict(&edges).unwrap();
            let p_del = gnndelete(&model, &train_graph, &usplit, &zero).unwrap().predict(&edges).unwrap();
            let p_ni = gnndelete_ni(&model, &train_graph, &usplit, &zero).unwrap().predict(&edges).unwrap();

            let ok = bits(&p_orig) == bits(&p_empty)
                && bits(&p_utu) == bits(&p_del)
                && bits(&p_utu) == bits(&p_ni);
            Outcome::new(ok, format!("{backbone}: {} edges", edges.len()))
        })
        .collect();
    Outcome::all(parts)
}

fn distances(adj: &[Vec<usize>], sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn locality() -> Outcome {
    let g = generate_sbm(
        SbmParams {
            blocks: 3,
            nodes_per_block: 10,
            p_in: 0.25,
            p_out: 0.02,
        },
        5,
    )
    .unwrap();
    let g = generate_features(&g, 8, 6).unwrap();
    let edges = g.edge_list();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let picks = rand::seq::index::sample(&mut rng, edges.len(), 3);
    let forget: Vec<Edge> = picks.iter().map(|i| edges[i]).collect();
    let retain: Vec<Edge> = edges.iter().copied().filter(|e| !forget.contains(e)).collect();
    let usplit = UnlearnSplit {
        forget: forget.clone(),
        retain,
        ratio: 3.0 / edges.len() as f64,
    };
    let endpoints: Vec<usize> = forget.iter().flat_map(|e| [e.0, e.1]).collect();
    let dist = distances(&g.adjacency(), &endpoints);
    let far: Vec<usize> = (0..g.num_nodes()).filter(|&v| dist[v] > 2).collect();

    let parts: Vec<Outcome> = Backbone::ALL
        .into_iter()
        .map(|backbone| {
            let tcfg = TrainConfig {
                epochs: 30,
                seed: 8,
                ..TrainConfig::default()
            };
            let model = Arc::new(fit(&ModelConfig::new(backbone, 16, 16), &g, &edges, &[], &[], &tcfg).unwrap());
            let original = UnlearnedPredictor::original(Arc::clone(&model), g.clone());
            let unlinked = utu(&model, &g, &usplit).unwrap();
            let h_o = original.embeddings().unwrap();
            let h_u = unlinked.embeddings().unwrap();
            let same = far.iter().all(|&v| bits(h_o.row(v)) == bits(h_u.row(v)));
            Outcome::new(same, format!("{backbone}: {} far nodes of 30 identical", far.len()))
        })
        .collect();
    let mut all = vec![Outcome::new(
        !far.is_empty(),
        format!("{} nodes beyond 2 hops of the 3 forget edges", far.len()),
    )];
    all.extend(parts);
    Outcome::all(all)
}

fn small_instance(backbone: Backbone) -> (Graph, Arc<Model>, ModelConfig, UnlearnSplit) {
    // Two 5-cliques joined by one edge: 10 nodes, 21 edges.
    let mut edges: Vec<Edge> = Vec::new();
    for b in 0..2 {
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push(Edge::new(5 * b + u, 5 * b + v));
            }
        }
    }
    edges.push(Edge::new(4, 5));
    let g = Graph::new(10, edges.iter().copied()).unwrap();
    let g = generate_features(&g, 4, 11).unwrap();
    let mut config = ModelConfig::new(backbone, 5, 4);
    config.gat_heads = 2;
    let tcfg = TrainConfig {
        epochs: 10,
        seed: 12,
        ..TrainConfig::default()
    };
    let model = Arc::new(fit(&config, &g, &edges, &[], &[], &tcfg).unwrap());
    let usplit = UnlearnSplit {
        forget: vec![edges[1], edges[20]],
        retain: edges.iter().copied().filter(|e| *e != edges[1] && *e != edges[20]).collect(),
        ratio: 2.0 / 21.0,
    };
    (g, model, config, usplit)
}

fn lp_loss_error(g: &Graph, model: &Model, config: &ModelConfig) -> f64 {
    let ms = to_message_structure(g, config.backbone);
    let x = g.features().unwrap().clone();
    let pos = [Edge::new(0, 1), Edge::new(2, 3), Edge::new(4, 5), Edge::new(7, 9)];
    let neg = [Edge::new(0, 6), Edge::new(1, 8), Edge::new(3, 9)];
    let params: Vec<Matrix> = model.tensors().into_iter().cloned().collect();
    grad_check_many(
        |tape, vars| {
            let mut it = vars.iter().copied();
            let layers: Vec<Layer<_>> = model.layers.iter().map(|l| l.map(&mut |_| it.next().unwrap())).collect();
            let xv = tape.constant(x.clone());
            let h = *encode(tape, config, &layers, &ms, xv, None)?.last().unwrap();
            lp_loss(tape, h, &pos, &neg)
        },
        &params,
        EPS,
    )
    .unwrap()
}

fn unlearning_errors(g: &Graph, model: &Arc<Model>, config: &ModelConfig, usplit: &UnlearnSplit) -> [f64; 3] {
    let masks = deletion_masks(g, &usplit.forget, config.num_layers);
    let retain_graph = g.unlink(&usplit.forget).unwrap();
    let obj = DeleteObjective {
        model: Arc::clone(model),
        structure: to_message_structure(&retain_graph, config.backbone),
        features: g.features().unwrap().clone(),
        targets: edge_unlearn::gnn::forward_layers(model, g, None).unwrap(),
        nodes: masks.iter().map(|m| (0..m.len()).filter(|&i| m[i]).collect()).collect(),
        forget: usplit.forget.clone(),
        lambda: 0.5,
    };
    let pairs = sample_random_pairs(g.num_nodes(), usplit.forget.len(), 13).unwrap();

    let h = obj.targets[0].map(|v| 0.8 * v - 0.05);
    let dec = grad_check(|tape, h| dec_loss(tape, h, &obj.targets[0], &obj.forget, &pairs), &h, EPS).unwrap();
    let ni = grad_check(|tape, h| ni_loss(tape, h, &obj.targets[0], &obj.nodes[0]), &h, EPS).unwrap();

    let mut op = DeletionOperator::identity(config, masks).unwrap();
    for (k, t) in op.tensors_mut().into_iter().enumerate() {
        for (j, v) in t.as_mut_slice().iter_mut().enumerate() {
            *v += 0.04 * (((3 * k + 5 * j) % 7) as f64 - 3.0) / 3.0;
        }
    }
    let params: Vec<Matrix> = op.layers.iter().flat_map(|l| [l.weight.clone(), l.bias.clone()]).collect();
    let total = grad_check_many(
        |tape: &mut Tape, vars| {
            let ops: Vec<OperatorVars> = op
                .layers
                .iter()
                .enumerate()
                .map(|(l, layer)| OperatorVars {
                    weight: vars[2 * l],
                    bias: vars[2 * l + 1],
                    mask: Arc::clone(&layer.mask),
                })
                .collect();
            obj.record(tape, &ops, &pairs)
        },
        &params,
        EPS,
    )
    .unwrap();
    [dec, ni, total]
}

pub fn gradients() -> Outcome {
    let parts = Backbone::ALL
        .into_iter()
        .map(|backbone| {
            let (g, model, config, usplit) = small_instance(backbone);
            let lp = lp_loss_error(&g, &model, &config);
            let [dec, ni, total] = unlearning_errors(&g, &model, &config, &usplit);
            let worst = lp.max(dec).max(ni).max(total);
            Outcome::new(
                worst < GRAD_TOL,
                format!("{backbone}: lp {lp:.1e}, dec {dec:.1e}, ni {ni:.1e}, total {total:.1e}"),
            )
        })
        .collect();
    Outcome::all(parts)
}

fn pairwise_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut twice_u: u128 = 0;
    for &p in pos {
        for &n in neg {
            twice_u += match p.partial_cmp(&n).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    edge_unlearn::eval::auc_from_count(twice_u, pos.len(), neg.len())
}

pub fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut auc_mismatch = 0;
    let mut complement_mismatch = 0;
    for i in 0..1000 {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if i % 2 == 0 {
                        f64::from(rng.random_range(0..5u8)) / 4.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        };
        let (np, nn) = (1 + i % 17, 1 + (i * 7) % 23);
        let pos = draw(np);
        let neg = draw(nn);
        if roc_auc(&pos, &neg).unwrap() != pairwise_auc(&pos, &neg) {
            auc_mismatch += 1;
        }
        if roc_auc(&pos, &neg).unwrap() + roc_auc(&neg, &pos).unwrap() != 1.0 {
            complement_mismatch += 1;
        }
    }

    let grid: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
    let mut js_violations = 0;
    for &p in &grid {
        for &q in &grid {
            let d = js_divergence(p, q);
            let symmetric = d == js_divergence(q, p);
            let zero_iff_equal = (d == 0.0) == (p == q);
            let bounded = (0.0..=1.0).contains(&d);
            let max_only_disjoint = d < 1.0 || (p - q).abs() == 1.0;
            if !(symmetric && zero_iff_equal && bounded && max_only_disjoint) {
                js_violations += 1;
            }
        }
    }

    let (g, model, _, usplit) = small_instance(Backbone::Gcn);
    let pred = UnlearnedPredictor::original(model, g);
    let dp = delta_p(&pred, &pred, &usplit.retain).unwrap();
    let self_zero = dp.per_edge.iter().all(|&d| d == 0.0) && dp.mean == 0.0;

    Outcome::all(vec![
        Outcome::new(auc_mismatch == 0, format!("AUC vs pairwise: {auc_mismatch}/1000 mismatches")),
        Outcome::new(complement_mismatch == 0, format!("AUC complement: {complement_mismatch}/1000 off")),
        Outcome::new(js_violations == 0, format!("JS on 41x41 grid: {js_violations} violations")),
        Outcome::new(self_zero, format!("delta_p self-comparison over {} edges", dp.per_edge.len())),
    ])
}
