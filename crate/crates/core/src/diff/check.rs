use super::{Tape, Var};
use crate::error::Result;
use crate::matrix::Matrix;

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences.
///
/// Returns the maximum over all coordinates of
/// `|fd - ad| / max(1e-8, |fd| + |ad|)`.
pub fn grad_check(f: impl Fn(&mut Tape, Var) -> Result<Var>, x: &Matrix, eps: f64) -> Result<f64> {
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several parameter tensors at once.
pub fn grad_check_many(
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
    xs: &[Matrix],
    eps: f64,
) -> Result<f64> {
    let eval = |point: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = point.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = xs.iter().map(|m| tape.leaf(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Matrix> = vars.iter().map(|&v| tape.grad(v)).collect();

    let mut point = xs.to_vec();
    let mut worst = 0.0f64;
    for t in 0..xs.len() {
        for k in 0..xs[t].len() {
            let orig = xs[t].as_slice()[k];
            point[t].as_mut_slice()[k] = orig + eps;
            let up = eval(&point)?;
            point[t].as_mut_slice()[k] = orig - eps;
            let down = eval(&point)?;
            point[t].as_mut_slice()[k] = orig;

            let fd = (up - down) / (2.0 * eps);
            let ad = analytic[t].as_slice()[k];
            let err = (fd - ad).abs() / (fd.abs() + ad.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
