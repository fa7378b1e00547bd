//! Central finite-difference gradient checking for tape computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Largest discrepancy found by [`check_gradients`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(input index, element index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Entries where both derivatives are below this are not compared.
pub const NEGLIGIBLE: f64 = 1e-8;

fn relative_error(a: f64, n: f64) -> f64 {
    if a.abs() < NEGLIGIBLE && n.abs() < NEGLIGIBLE {
        return 0.0;
    }
    (a - n).abs() / a.abs().max(n.abs())
}

/// Compares reverse-mode gradients of `sum(w ⊙ f(inputs))`, with `w` a
/// fixed random projection, against central differences of step `h` for
/// every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], f: F, h: f64, seed: u64) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).clone()
    };
    let signed: Vec<f64> = (0..probe.len())
        .map(|_| rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let weights = Tensor::new(probe.shape().to_vec(), signed)?;

    let objective = |tape: &mut Tape<f64>, vars: &[Var]| -> Result<Var> {
        let out = f(tape, vars)?;
        let w = tape.constant(weights.clone());
        let prod = tape.hadamard(out, w)?;
        Ok(tape.sum(prod))
    };
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = objective(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = objective(&mut tape, &vars)?;
    tape.backward(loss)?;

    let mut report = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let mut xs = inputs.to_vec();
    for (i, &v) in vars.iter().enumerate() {
        let analytic = tape
            .grad(v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            xs[i].data_mut()[j] = x0 + h;
            let up = eval(&xs)?;
            xs[i].data_mut()[j] = x0 - h;
            let down = eval(&xs)?;
            xs[i].data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[j], numeric);
            if !err.is_finite() {
                return Err(Error::Invariant(format!(
                    "non-finite gradient at input {i}[{j}]"
                )));
            }
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((i, j, analytic[j], numeric));
            }
        }
    }
    Ok(report)
}
