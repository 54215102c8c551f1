//! Gated recurrent units and the bidirectional wrapper.
//!
//! The cell uses separate input-side and recurrent-side biases, with the
//! reset gate applied after the recurrent projection:
//!
//! ```text
//! z  = σ(x·Wz + bz + h·Uz + cz)
//! r  = σ(x·Wr + br + h·Ur + cr)
//! n  = tanh(x·Wn + bn + r ⊙ (h·Un + cn))
//! h' = (1 − z) ⊙ h + z ⊙ n
//! ```
//!
//! The three gates are packed along the last axis in the order `z, r, n`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nn::{check_trailing, glorot_bound, ParamId, ParamSet, Scope};
use crate::tensor::Tensor;

/// Trainable scalars in a dual-bias GRU cell.
pub fn gru_param_count(inputs: usize, hidden: usize) -> usize {
    3 * (hidden * (inputs + hidden) + 2 * hidden)
}

/// Trainable scalars in a single-bias LSTM cell (used only for auditing).
pub fn lstm_param_count(inputs: usize, hidden: usize) -> usize {
    4 * (hidden * (inputs + hidden) + hidden)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone)]
pub struct GruCell {
    pub inputs: usize,
    pub hidden: usize,
    /// `[inputs, 3·hidden]`
    pub w_input: ParamId,
    /// `[hidden, 3·hidden]`
    pub w_recurrent: ParamId,
    /// `[3·hidden]`
    pub b_input: ParamId,
    /// `[3·hidden]`
    pub b_recurrent: ParamId,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let h3 = 3 * hidden;
        Self {
            inputs,
            hidden,
            w_input: params.add(
                format!("{name}.w_input"),
                Tensor::uniform(&[inputs, h3], glorot_bound(inputs, hidden), rng),
                true,
            ),
            w_recurrent: params.add(
                format!("{name}.w_recurrent"),
                Tensor::uniform(&[hidden, h3], glorot_bound(hidden, hidden), rng),
                true,
            ),
            b_input: params.add(format!("{name}.b_input"), Tensor::zeros(&[h3]), true),
            b_recurrent: params.add(format!("{name}.b_recurrent"), Tensor::zeros(&[h3]), true),
        }
    }

    pub fn param_count(&self) -> usize {
        gru_param_count(self.inputs, self.hidden)
    }

    /// One update given the precomputed input projection `gx = x_t·W + b` (`[batch, 3H]`).
    fn step_projected(&self, s: &mut Scope<'_>, h_prev: Var, gx: Var) -> Result<Var> {
        let hd = self.hidden;
        let (wh, bh) = (s.param(self.w_recurrent), s.param(self.b_recurrent));
        let gh = s.graph.matmul(h_prev, wh)?;
        let gh = s.graph.add(gh, bh)?;
        let g = &mut s.graph;
        let gx_zr = g.narrow(gx, 1, 0, 2 * hd)?;
        let gh_zr = g.narrow(gh, 1, 0, 2 * hd)?;
        let zr = g.add(gx_zr, gh_zr)?;
        let zr = g.sigmoid(zr);
        let z = g.narrow(zr, 1, 0, hd)?;
        let r = g.narrow(zr, 1, hd, hd)?;
        let gx_n = g.narrow(gx, 1, 2 * hd, hd)?;
        let gh_n = g.narrow(gh, 1, 2 * hd, hd)?;
        let gated = g.mul(r, gh_n)?;
        let n = g.add(gx_n, gated)?;
        let n = g.tanh(n);
        // (1 - z)·h + z·n == h + z·(n - h)
        let delta = g.sub(n, h_prev)?;
        let delta = g.mul(z, delta)?;
        g.add(h_prev, delta)
    }

    pub fn step(&self, s: &mut Scope<'_>, h_prev: Var, x_t: Var) -> Result<Var> {
        let xs = s.graph.shape(x_t).to_vec();
        let hs = s.graph.shape(h_prev).to_vec();
        if xs.len() != 2 || hs.len() != 2 || xs[0] != hs[0] || xs[1] != self.inputs || hs[1] != self.hidden {
            return Err(Error::dim(
                "gru_step",
                format!(
                    "expected x [batch, {}] and h [batch, {}], got {xs:?} and {hs:?}",
                    self.inputs, self.hidden
                ),
            ));
        }
        let (wx, bx) = (s.param(self.w_input), s.param(self.b_input));
        let gx = s.graph.matmul(x_t, wx)?;
        let gx = s.graph.add(gx, bx)?;
        self.step_projected(s, h_prev, gx)
    }

    /// Run over `[batch, T, inputs]` from a zero state; output `[batch, T, hidden]`,
    /// where position `t` always holds the state after consuming `x_t`.
    pub fn sequence(&self, s: &mut Scope<'_>, x: Var, direction: Direction) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 {
            return Err(Error::dim("gru_sequence", format!("expected [batch, T, input], got {shape:?}")));
        }
        check_trailing("gru_sequence", &shape, self.inputs)?;
        let (batch, steps) = (shape[0], shape[1]);
        let (wx, bx) = (s.param(self.w_input), s.param(self.b_input));
        let gx_all = s.graph.matmul(x, wx)?;
        let gx_all = s.graph.add(gx_all, bx)?;
        let mut h = s.input(Tensor::zeros(&[batch, self.hidden]));
        let mut states = vec![None; steps];
        let order: Vec<usize> = match direction {
            Direction::Forward => (0..steps).collect(),
            Direction::Backward => (0..steps).rev().collect(),
        };
        for t in order {
            let gx = s.graph.narrow(gx_all, 1, t, 1)?;
            let gx = s.graph.reshape(gx, &[batch, 3 * self.hidden])?;
            h = self.step_projected(s, h, gx)?;
            states[t] = Some(s.graph.reshape(h, &[batch, 1, self.hidden])?);
        }
        let states: Vec<Var> = states.into_iter().map(|v| v.expect("every step visited")).collect();
        s.graph.concat(&states, 1)
    }
}

#[derive(Debug, Clone)]
pub struct BiGru {
    pub forward: GruCell,
    pub backward: GruCell,
}

impl BiGru {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            forward: GruCell::new(params, &format!("{name}.forward"), inputs, hidden, rng),
            backward: GruCell::new(params, &format!("{name}.backward"), inputs, hidden, rng),
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward.hidden
    }

    pub fn param_count(&self) -> usize {
        self.forward.param_count() + self.backward.param_count()
    }

    /// `[h_forward ; h_backward]` per time step.
    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        let f = self.forward.sequence(s, x, Direction::Forward)?;
        let b = self.backward.sequence(s, x, Direction::Backward)?;
        s.graph.concat(&[f, b], 2)
    }
}
