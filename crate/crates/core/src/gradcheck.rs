//! Central finite-difference gradient checking.
//!
//! The checker perturbs plain input tensors and re-runs a closure that
//! rebuilds the computation on a fresh [`Graph`]; it shares nothing with the
//! reverse pass beyond the forward values.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Mode, ParamSet, Scope};
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Per input: `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`.
    pub relative_errors: Vec<f64>,
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
}

impl GradCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().copied().fold(0.0, f64::max)
    }
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom < 1e-300 {
        diff
    } else {
        diff / denom
    }
}

/// Compare reverse-mode gradients of a scalar `f(inputs)` against central
/// differences with the given `step`.
pub fn check<F>(inputs: &[Tensor], step: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).len() != 1 {
        return Err(Error::Contract("gradient check needs a scalar output".into()));
    }
    let grads = g.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(&g, v)).collect();

    let eval = |ts: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        g.value(out).item()
    };

    let mut numeric = Vec::with_capacity(inputs.len());
    let mut work: Vec<Tensor> = inputs.to_vec();
    for i in 0..inputs.len() {
        let mut grad = Tensor::zeros(inputs[i].shape());
        for k in 0..inputs[i].len() {
            let orig = inputs[i].data()[k];
            work[i].data_mut()[k] = orig + step;
            let plus = eval(&work)?;
            work[i].data_mut()[k] = orig - step;
            let minus = eval(&work)?;
            work[i].data_mut()[k] = orig;
            grad.data_mut()[k] = (plus - minus) / (2.0 * step);
        }
        numeric.push(grad);
    }
    let relative_errors = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(a.data(), n.data()))
        .collect();
    Ok(GradCheck {
        relative_errors,
        analytic,
        numeric,
    })
}

/// Like [`check`], but over every trainable tensor of a [`ParamSet`], with the
/// computation expressed against a [`Scope`]. Each evaluation uses a fresh
/// scope with the same `mode` and `seed`, so dropout masks repeat.
pub fn check_params<F>(params: &ParamSet, mode: Mode, seed: u64, step: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Scope<'_>) -> Result<Var>,
{
    let mut scope = Scope::new(params, mode, seed);
    let out = f(&mut scope)?;
    if scope.graph.value(out).len() != 1 {
        return Err(Error::Contract("gradient check needs a scalar output".into()));
    }
    let mut grads = scope.graph.backward(out)?;
    let param_grads = scope.param_grads(&mut grads);

    let eval = |p: &ParamSet| -> Result<f64> {
        let mut s = Scope::new(p, mode, seed);
        let out = f(&mut s)?;
        s.graph.value(out).item()
    };

    let mut work = params.clone();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (id, grad) in params.ids().zip(param_grads) {
        let entry = &params.entries()[id.index()];
        if !entry.trainable {
            continue;
        }
        let mut num = Tensor::zeros(entry.tensor.shape());
        for k in 0..entry.tensor.len() {
            let orig = entry.tensor.data()[k];
            work.get_mut(id).data_mut()[k] = orig + step;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig - step;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig;
            num.data_mut()[k] = (plus - minus) / (2.0 * step);
        }
        analytic.push(grad.unwrap_or_else(|| Tensor::zeros(entry.tensor.shape())));
        numeric.push(num);
    }
    let relative_errors = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(a.data(), n.data()))
        .collect();
    Ok(GradCheck {
        relative_errors,
        analytic,
        numeric,
    })
}
