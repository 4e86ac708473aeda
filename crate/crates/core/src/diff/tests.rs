use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::seed;

fn col(values: &[f64]) -> Matrix {
    Matrix::column(values)
}

#[test]
fn mse_example() {
    let mut t = Tape::new();
    let a = t.constant(col(&[1.0, 0.0]));
    let b = t.constant(col(&[0.0, 0.0]));
    let l = t.mse(a, b).unwrap();
    assert_eq!(t.value(l).item(), 0.5);
}

#[test]
fn sigmoid_at_zero() {
    let mut t = Tape::new();
    let a = t.constant(Matrix::scalar(0.0));
    let s = t.sigmoid(a);
    assert_eq!(t.value(s).item(), 0.5);
}

#[test]
fn segment_softmax_equal_logits() {
    let mut t = Tape::new();
    let a = t.constant(col(&[1.7, 1.7]));
    let seg: Arc<[usize]> = vec![0, 0].into();
    let s = t.segment_softmax(a, &seg, 1).unwrap();
    assert_eq!(t.value(s).as_slice(), &[0.5, 0.5]);
}

#[test]
fn segment_softmax_is_stable_for_large_scores() {
    let mut t = Tape::new();
    let a = t.constant(col(&[1000.0, 1000.0, -1000.0]));
    let seg: Arc<[usize]> = vec![0, 0, 1].into();
    let s = t.segment_softmax(a, &seg, 2).unwrap();
    assert_eq!(t.value(s).as_slice(), &[0.5, 0.5, 1.0]);
}

#[test]
fn unsorted_segments_rejected() {
    let mut t = Tape::new();
    let a = t.constant(col(&[1.0, 2.0]));
    let seg: Arc<[usize]> = vec![1, 0].into();
    assert!(t.segment_sum(a, &seg, 2).is_err());
    let seg: Arc<[usize]> = vec![0, 2].into();
    assert!(t.segment_sum(a, &seg, 2).is_err());
}

#[test]
fn mean_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(col(&[1.0, -2.0, 3.0, 4.0]));
    let m = t.mean(x).unwrap();
    t.backward(m).unwrap();
    assert_eq!(t.grad(x).as_slice(), &[0.25; 4]);
}

#[test]
fn square_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(col(&[3.0]));
    let z = t.constant(col(&[0.0]));
    let l = t.mse(x, z).unwrap();
    t.backward(l).unwrap();
    assert_eq!(t.grad(x).item(), 6.0);
}

#[test]
fn unrelated_leaf_gets_zero_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(col(&[1.0, 2.0]));
    let c = t.constant(col(&[5.0, 6.0]));
    let out = t.mean(c).unwrap();
    t.backward(out).unwrap();
    assert_eq!(t.grad(x), Matrix::zeros(2, 1));
}

#[test]
fn backward_requires_scalar() {
    let mut t = Tape::new();
    let x = t.leaf(col(&[1.0, 2.0]));
    assert!(matches!(t.backward(x), Err(Error::Shape { op: "backward", .. })));
}

#[test]
fn repeated_backward_does_not_accumulate() {
    let mut t = Tape::new();
    let x = t.leaf(col(&[1.0, 2.0]));
    let y = t.scale(x, 3.0);
    let out = t.mean(y).unwrap();
    t.backward(out).unwrap();
    let first = t.grad(x);
    t.backward(out).unwrap();
    assert_eq!(t.grad(x), first);
    assert_eq!(first.as_slice(), &[1.5, 1.5]);
}

#[test]
fn kink_subgradients() {
    let mut t = Tape::new();
    let x = t.leaf(col(&[0.0, 0.0]));
    let r = t.relu(x);
    let lr = t.leaky_relu(x, 0.2);
    let sum = t.add(r, lr).unwrap();
    let out = t.mean(sum).unwrap();
    t.backward(out).unwrap();
    // (0 + 0.2) / 2 per entry
    assert_eq!(t.grad(x).as_slice(), &[0.1, 0.1]);
}

#[test]
fn shape_errors_name_the_operation() {
    let mut t = Tape::new();
    let a = t.leaf(Matrix::zeros(2, 3));
    let b = t.leaf(Matrix::zeros(2, 2));
    assert!(matches!(t.add(a, b), Err(Error::Shape { op: "add", .. })));
    assert!(matches!(t.matmul(a, a), Err(Error::Shape { op: "matmul", .. })));
    assert!(matches!(t.mse(a, b), Err(Error::Shape { op: "mse", .. })));
}

#[test]
fn grad_check_linear_is_exact() {
    let w = Matrix::from_rows(&[vec![0.3, -1.2, 2.0]]).unwrap();
    let err = grad_check(
        |t, x| {
            let w = t.constant(w.clone());
            let y = t.row_dot(x, w)?;
            t.mean(y)
        },
        &Matrix::from_rows(&[vec![1.0, 2.0, -0.5]]).unwrap(),
        1e-5,
    )
    .unwrap();
    assert!(err <= 1e-9, "{err}");
}

#[test]
fn grad_check_sum_of_squares() {
    let err = grad_check(
        |t, x| {
            let z = t.constant(Matrix::zeros(2, 1));
            t.mse(x, z)
        },
        &col(&[1.0, 2.0]),
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-7, "{err}");
}

/// Random matrix with entries bounded away from the relu kink.
fn random_matrix(rng: &mut seed::Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let mag = rng.random_range(0.05..1.5);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Contracts a matrix with fixed random weights into a scalar, so every
/// entry gets a distinct gradient.
fn reduce(t: &mut Tape, v: Var, weights: &Matrix) -> Result<Var> {
    let w = t.constant(weights.clone());
    let d = t.row_dot(v, w)?;
    t.mean(d)
}

fn sorted_segments(rng: &mut seed::Rng, rows: usize, n_seg: usize) -> Arc<[usize]> {
    let mut seg: Vec<usize> = (0..rows).map(|_| rng.random_range(0..n_seg)).collect();
    seg.sort_unstable();
    seg.into()
}

fn small_csr(rng: &mut seed::Rng, n: usize) -> Arc<Csr> {
    let edges: Vec<crate::graph::Edge> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| crate::graph::Edge(u, v)))
        .filter(|_| rng.random::<f64>() < 0.4)
        .collect();
    let g = crate::graph::Graph::new(n, edges).unwrap();
    let ms = crate::graph::to_message_structure(&g, crate::graph::Backbone::Gcn);
    Arc::new(ms.adjacency().clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_primitive_passes_grad_check(s in 0u64..10_000, rows in 1usize..8, cols in 1usize..8, inner in 1usize..8) {
        let mut rng = seed::rng(s);
        let a = random_matrix(&mut rng, rows, cols);
        let b = random_matrix(&mut rng, rows, cols);
        let k = random_matrix(&mut rng, cols, inner);
        let w_rc = random_matrix(&mut rng, rows, cols);
        let w_ri = random_matrix(&mut rng, rows, inner);
        let w_r1 = random_matrix(&mut rng, rows, 1);
        let w_2c = random_matrix(&mut rng, rows, 2 * cols);
        let bias = random_matrix(&mut rng, 1, cols);
        let n_seg = rng.random_range(1..=rows);
        let seg = sorted_segments(&mut rng, rows, n_seg);
        let w_sc = random_matrix(&mut rng, n_seg, cols);
        let idx: Arc<[usize]> = (0..rows + 2).map(|_| rng.random_range(0..rows)).collect::<Vec<_>>().into();
        let w_gc = random_matrix(&mut rng, rows + 2, cols);
        let mask: Arc<[bool]> = (0..rows).map(|_| rng.random::<bool>()).collect::<Vec<_>>().into();
        let csr = small_csr(&mut rng, rows);
        let labels: Vec<f64> = (0..rows).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let col_a = random_matrix(&mut rng, rows, 1);
        let eps = 1e-5;
        let tol = 1e-5;

        let checks: Vec<(&str, f64)> = vec![
            ("matmul", grad_check_many(|t, v| { let y = t.matmul(v[0], v[1])?; reduce(t, y, &w_ri) }, &[a.clone(), k.clone()], eps).unwrap()),
            ("sparse_matmul", grad_check(|t, x| { let y = t.sparse_matmul(&csr, x)?; reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("add", grad_check_many(|t, v| { let y = t.add(v[0], v[1])?; reduce(t, y, &w_rc) }, &[a.clone(), b.clone()], eps).unwrap()),
            ("sub", grad_check_many(|t, v| { let y = t.sub(v[0], v[1])?; reduce(t, y, &w_rc) }, &[a.clone(), b.clone()], eps).unwrap()),
            ("scale", grad_check(|t, x| { let y = t.scale(x, -1.7); reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("concat_cols", grad_check_many(|t, v| { let y = t.concat_cols(v[0], v[1])?; reduce(t, y, &w_2c) }, &[a.clone(), b.clone()], eps).unwrap()),
            ("relu", grad_check(|t, x| { let y = t.relu(x); reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("leaky_relu", grad_check(|t, x| { let y = t.leaky_relu(x, 0.2); reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("sigmoid", grad_check(|t, x| { let y = t.sigmoid(x); reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("exp", grad_check(|t, x| { let y = t.exp(x); reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("segment_softmax", grad_check(|t, x| { let y = t.segment_softmax(x, &seg, n_seg)?; reduce(t, y, &w_rc) }, &a, eps).unwrap()),
            ("segment_sum", grad_check(|t, x| { let y = t.segment_sum(x, &seg, n_seg)?; reduce(t, y, &w_sc) }, &a, eps).unwrap()),
            ("mse", grad_check_many(|t, v| t.mse(v[0], v[1]), &[a.clone(), b.clone()], eps).unwrap()),
            ("bce_with_logits", grad_check(|t, x| t.bce_with_logits(x, &labels), &col_a, eps).unwrap()),
            ("mean", grad_check(|t, x| { let y = t.exp(x); t.mean(y) }, &a, eps).unwrap()),
            ("gather_rows", grad_check(|t, x| { let y = t.gather_rows(x, &idx)?; reduce(t, y, &w_gc) }, &a, eps).unwrap()),
            ("row_dot", grad_check_many(|t, v| { let y = t.row_dot(v[0], v[1])?; reduce(t, y, &w_r1) }, &[a.clone(), b.clone()], eps).unwrap()),
            ("scale_rows", grad_check_many(|t, v| { let y = t.scale_rows(v[0], v[1])?; reduce(t, y, &w_rc) }, &[a.clone(), col_a.clone()], eps).unwrap()),
            ("add_bias", grad_check_many(|t, v| { let y = t.add_bias(v[0], v[1])?; reduce(t, y, &w_rc) }, &[a.clone(), bias.clone()], eps).unwrap()),
            ("mask_rows", grad_check_many(|t, v| { let y = t.mask_rows(v[0], v[1], &mask)?; reduce(t, y, &w_rc) }, &[a.clone(), b.clone()], eps).unwrap()),
        ];
        for (name, err) in checks {
            prop_assert!(err < tol, "{} grad_check error {}", name, err);
        }
    }

    #[test]
    fn backward_is_deterministic(s in 0u64..1000) {
        let mut rng = seed::rng(s);
        let a = random_matrix(&mut rng, 5, 4);
        let k = random_matrix(&mut rng, 4, 3);
        let run = || {
            let mut t = Tape::new();
            let x = t.leaf(a.clone());
            let w = t.leaf(k.clone());
            let y = t.matmul(x, w).unwrap();
            let y = t.sigmoid(y);
            let out = t.mean(y).unwrap();
            t.backward(out).unwrap();
            (t.grad(x), t.grad(w))
        };
        let (g1, g2) = (run(), run());
        prop_assert_eq!(g1.0.as_slice(), g2.0.as_slice());
        prop_assert_eq!(g1.1.as_slice(), g2.1.as_slice());
    }
}
