use rand::Rng;

use super::{glorot_uniform, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Activation, Tape, Tensor, Var};

/// Gated recurrent unit:
///
/// ```text
/// z_t = σ(W_z x_t + U_z h_{t-1})
/// r_t = σ(W_r x_t + U_r h_{t-1})
/// h'_t = tanh(W x_t + r_t ⊙ (U h_{t-1}))
/// h_t = z_t ⊙ h_{t-1} + (1 - z_t) ⊙ h'_t
/// ```
///
/// Gate biases are optional and off unless the cell is built with them.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<T> {
    pub w_update: Tensor<T>,
    pub u_update: Tensor<T>,
    pub w_reset: Tensor<T>,
    pub u_reset: Tensor<T>,
    pub w_candidate: Tensor<T>,
    pub u_candidate: Tensor<T>,
    /// `(update, reset, candidate)` biases.
    pub biases: Option<[Tensor<T>; 3]>,
}

impl<T: Scalar> GruCell<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(vec![hidden_dim, input_dim]);
        let u = || Tensor::zeros(vec![hidden_dim, hidden_dim]);
        GruCell {
            w_update: w(),
            u_update: u(),
            w_reset: w(),
            u_reset: u(),
            w_candidate: w(),
            u_candidate: u(),
            biases: None,
        }
    }

    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        with_biases: bool,
        rng: &mut R,
    ) -> Self {
        let mut w = || glorot_uniform(&[hidden_dim, input_dim], input_dim, hidden_dim, rng);
        let (w_update, w_reset, w_candidate) = (w(), w(), w());
        let mut u = || glorot_uniform(&[hidden_dim, hidden_dim], hidden_dim, hidden_dim, rng);
        let (u_update, u_reset, u_candidate) = (u(), u(), u());
        GruCell {
            w_update,
            u_update,
            w_reset,
            u_reset,
            w_candidate,
            u_candidate,
            biases: with_biases.then(|| std::array::from_fn(|_| Tensor::zeros(vec![hidden_dim]))),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_update.shape()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_update.shape()[0]
    }

    /// Checks that all six matrices agree on one `(input, hidden)` pair.
    pub fn validate(&self) -> Result<()> {
        let (i, h) = (self.input_dim(), self.hidden_dim());
        let ws = [&self.w_update, &self.w_reset, &self.w_candidate];
        let us = [&self.u_update, &self.u_reset, &self.u_candidate];
        if ws.iter().any(|w| w.shape() != [h, i]) || us.iter().any(|u| u.shape() != [h, h]) {
            return Err(Error::Shape(format!(
                "GRU weights inconsistent with input {i}, hidden {h}"
            )));
        }
        if let Some(bs) = &self.biases {
            if bs.iter().any(|b| b.shape() != [h]) {
                return Err(Error::Shape(format!("GRU biases must have length {h}")));
            }
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> GruVars {
        GruVars {
            w_update: tape.param(self.w_update.clone()),
            u_update: tape.param(self.u_update.clone()),
            w_reset: tape.param(self.w_reset.clone()),
            u_reset: tape.param(self.u_reset.clone()),
            w_candidate: tape.param(self.w_candidate.clone()),
            u_candidate: tape.param(self.u_candidate.clone()),
            biases: self.biases.as_ref().map(|bs| {
                [
                    tape.param(bs[0].clone()),
                    tape.param(bs[1].clone()),
                    tape.param(bs[2].clone()),
                ]
            }),
            hidden: self.hidden_dim(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for GruCell<T> {
    fn parameters(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = vec![
            ("w_update", &self.w_update),
            ("u_update", &self.u_update),
            ("w_reset", &self.w_reset),
            ("u_reset", &self.u_reset),
            ("w_candidate", &self.w_candidate),
            ("u_candidate", &self.u_candidate),
        ];
        if let Some([bz, br, bh]) = &self.biases {
            out.extend([("b_update", bz), ("b_reset", br), ("b_candidate", bh)]);
        }
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![
            &mut self.w_update,
            &mut self.u_update,
            &mut self.w_reset,
            &mut self.u_reset,
            &mut self.w_candidate,
            &mut self.u_candidate,
        ];
        if let Some(bs) = &mut self.biases {
            out.extend(bs.iter_mut());
        }
        out
    }
}

/// One unrolled step with its intermediate gate values.
#[derive(Clone, Copy, Debug)]
pub struct GruStep {
    pub h: Var,
    pub update: Var,
    pub reset: Var,
    pub candidate: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GruSequence {
    /// `[steps, hidden]`, row `t` is `h_t`.
    pub states: Var,
    pub last: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_update: Var,
    pub u_update: Var,
    pub w_reset: Var,
    pub u_reset: Var,
    pub w_candidate: Var,
    pub u_candidate: Var,
    pub biases: Option<[Var; 3]>,
    hidden: usize,
}

impl GruVars {
    /// Handles in parameter order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![
            self.w_update,
            self.u_update,
            self.w_reset,
            self.u_reset,
            self.w_candidate,
            self.u_candidate,
        ];
        if let Some(bs) = self.biases {
            out.extend(bs);
        }
        out
    }

    pub fn step<T: Scalar>(&self, tape: &mut Tape<T>, x: Var, h_prev: Var) -> Result<GruStep> {
        self.step_with(tape, x, h_prev, None)
    }

    /// Like [`GruVars::step`], but `force_update` replaces the update gate
    /// with a constant vector, for checking the interpolation law in isolation.
    pub fn step_with<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        x: Var,
        h_prev: Var,
        force_update: Option<T>,
    ) -> Result<GruStep> {
        if tape.shape(h_prev) != [self.hidden] {
            return Err(Error::Shape(format!(
                "hidden state {:?}, expected [{}]",
                tape.shape(h_prev),
                self.hidden
            )));
        }
        let bias = |i: usize| self.biases.map(|b| b[i]);
        let gate = |tape: &mut Tape<T>, w: Var, u: Var, b: Option<Var>| -> Result<Var> {
            let wx = tape.matmul(w, x)?;
            let uh = tape.matmul(u, h_prev)?;
            let mut s = tape.add(wx, uh)?;
            if let Some(b) = b {
                s = tape.add(s, b)?;
            }
            Ok(tape.activate(s, Activation::Sigmoid))
        };

        let update = match force_update {
            Some(v) => tape.constant(Tensor::full(vec![self.hidden], v)),
            None => gate(tape, self.w_update, self.u_update, bias(0))?,
        };
        let reset = gate(tape, self.w_reset, self.u_reset, bias(1))?;

        let wx = tape.matmul(self.w_candidate, x)?;
        let uh = tape.matmul(self.u_candidate, h_prev)?;
        let gated = tape.hadamard(reset, uh)?;
        let mut pre = tape.add(wx, gated)?;
        if let Some(b) = bias(2) {
            pre = tape.add(pre, b)?;
        }
        let candidate = tape.activate(pre, Activation::Tanh);

        let keep = tape.hadamard(update, h_prev)?;
        let complement = tape.one_minus(update);
        let fresh = tape.hadamard(complement, candidate)?;
        let h = tape.add(keep, fresh)?;
        Ok(GruStep {
            h,
            update,
            reset,
            candidate,
        })
    }

    /// Folds [`GruVars::step`] over the rows of `xs` (`[steps, input]`).
    pub fn sequence<T: Scalar>(&self, tape: &mut Tape<T>, xs: Var, h0: Var) -> Result<GruSequence> {
        let shape = tape.shape(xs).to_vec();
        if shape.len() != 2 {
            return Err(Error::Shape(format!(
                "GRU input must be [steps, input], got {shape:?}"
            )));
        }
        let steps = shape[0];
        if steps == 0 {
            return Err(Error::Contract("empty GRU sequence".into()));
        }
        let mut h = h0;
        let mut states = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = tape.row(xs, t)?;
            h = self.step(tape, x, h)?.h;
            states.push(h);
        }
        Ok(GruSequence {
            states: tape.stack(&states)?,
            last: h,
        })
    }
}
