//! Layer building blocks over [`Tape`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamSet};
use super::tape::{Tape, TensorError, Var};

/// `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let weight = params.add_uniform(format!("{name}.weight"), fan_in, fan_out, fan_in, rng);
        let bias = params.add_uniform(format!("{name}.bias"), 1, fan_out, fan_in, rng);
        Self { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        tape.affine(x, w, b)
    }
}

/// Recurrent cell flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Gated recurrent unit (update gate, reset gate, candidate state).
    #[default]
    Gru,
    /// `h' = tanh(x W + h U + b)`.
    Tanh,
}

#[derive(Debug, Clone)]
pub enum RecurrentCell {
    Gru {
        update_x: Dense,
        update_h: ParamId,
        reset_x: Dense,
        reset_h: ParamId,
        cand_x: Dense,
        cand_h: ParamId,
    },
    Tanh {
        input: Dense,
        hidden: ParamId,
    },
}

impl RecurrentCell {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        let hidden = |params: &mut ParamSet, gate: &str, rng: &mut R| {
            params.add_uniform(format!("{name}.{gate}.hidden"), hidden_dim, hidden_dim, hidden_dim, rng)
        };
        match kind {
            CellKind::Gru => {
                let update_x = Dense::new(params, &format!("{name}.update"), input_dim, hidden_dim, rng);
                let update_h = hidden(params, "update", rng);
                let reset_x = Dense::new(params, &format!("{name}.reset"), input_dim, hidden_dim, rng);
                let reset_h = hidden(params, "reset", rng);
                let cand_x = Dense::new(params, &format!("{name}.candidate"), input_dim, hidden_dim, rng);
                let cand_h = hidden(params, "candidate", rng);
                RecurrentCell::Gru {
                    update_x,
                    update_h,
                    reset_x,
                    reset_h,
                    cand_x,
                    cand_h,
                }
            }
            CellKind::Tanh => {
                let input = Dense::new(params, &format!("{name}.input"), input_dim, hidden_dim, rng);
                RecurrentCell::Tanh {
                    input,
                    hidden: hidden(params, "input", rng),
                }
            }
        }
    }

    /// One recurrent update for a batch of rows.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var) -> Result<Var, TensorError> {
        match self {
            RecurrentCell::Gru {
                update_x,
                update_h,
                reset_x,
                reset_h,
                cand_x,
                cand_h,
            } => {
                let gate = |tape: &mut Tape, dense: &Dense, u: ParamId, h_in: Var| -> Result<Var, TensorError> {
                    let xa = dense.forward(tape, x)?;
                    let uw = tape.param(u);
                    let hu = tape.matmul(h_in, uw)?;
                    tape.add(xa, hu)
                };
                let z_pre = gate(tape, update_x, *update_h, h)?;
                let z = tape.sigmoid(z_pre);
                let r_pre = gate(tape, reset_x, *reset_h, h)?;
                let r = tape.sigmoid(r_pre);
                let rh = tape.mul(r, h)?;
                let n_pre = gate(tape, cand_x, *cand_h, rh)?;
                let n = tape.tanh(n_pre);
                let keep_new = tape.one_minus(z);
                let a = tape.mul(keep_new, n)?;
                let b = tape.mul(z, h)?;
                tape.add(a, b)
            }
            RecurrentCell::Tanh { input, hidden } => {
                let xa = input.forward(tape, x)?;
                let u = tape.param(*hidden);
                let hu = tape.matmul(h, u)?;
                let pre = tape.add(xa, hu)?;
                Ok(tape.tanh(pre))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use crate::rng::keyed_rng;

    #[test]
    fn gru_state_stays_bounded() {
        let mut rng = keyed_rng(4, &[]);
        let mut ps = ParamSet::new();
        let cell = RecurrentCell::new(&mut ps, "rnn", CellKind::Gru, 3, 5, &mut rng);
        let mut tape = Tape::new(&ps);
        let mut h = tape.constant(Tensor::from_vec(2, 5, (0..10).map(|i| (i as f64 / 10.0) - 0.45).collect()));
        for step in 0..20 {
            let x = tape.constant(Tensor::filled(2, 3, 50.0 * (step as f64).sin()));
            h = cell.step(&mut tape, x, h).unwrap();
            assert!(tape.value(h).data.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn cell_rejects_wrong_input_width() {
        let mut rng = keyed_rng(4, &[]);
        let mut ps = ParamSet::new();
        let cell = RecurrentCell::new(&mut ps, "rnn", CellKind::Tanh, 3, 2, &mut rng);
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::zeros(1, 4));
        let h = tape.constant(Tensor::zeros(1, 2));
        assert!(matches!(cell.step(&mut tape, x, h), Err(TensorError::ShapeMismatch { op: "matmul", .. })));
    }
}
