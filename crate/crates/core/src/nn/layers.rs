use rand::Rng;

use super::params::{ParamId, ParamSet, RunningUpdate, Scope};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn check_trailing(op: &str, shape: &[usize], want: usize) -> Result<()> {
    match shape.last() {
        Some(&d) if d == want => Ok(()),
        _ => Err(Error::dim(
            op,
            format!("expected trailing extent {want}, got shape {shape:?}"),
        )),
    }
}

/// Affine map `x·W + b` along the trailing axis.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let bound = glorot_bound(inputs, outputs);
        let weight = params.add(
            format!("{name}.weight"),
            Tensor::uniform(&[inputs, outputs], bound, rng),
            true,
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[outputs]), true);
        Self {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        check_trailing("dense", s.graph.shape(x), self.inputs)?;
        let w = s.param(self.weight);
        let b = s.param(self.bias);
        let xw = s.graph.matmul(x, w)?;
        s.graph.add(xw, b)
    }
}

/// Default layer-norm epsilon. Small enough that normalized slices with
/// variance above 1e-4 keep unit variance to 1e-5.
pub const LAYER_NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub shift: ParamId,
    pub features: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(params: &mut ParamSet, name: &str, features: usize) -> Self {
        Self {
            gain: params.add(format!("{name}.gain"), Tensor::ones(&[features]), true),
            shift: params.add(format!("{name}.shift"), Tensor::zeros(&[features]), true),
            features,
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.features
    }

    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        check_trailing("layer_norm", s.graph.shape(x), self.features)?;
        let gain = s.param(self.gain);
        let shift = s.param(self.shift);
        layer_norm(s, x, gain, shift, self.eps)
    }
}

/// Standardize each trailing slice, then apply `gain` and `shift`.
pub fn layer_norm(s: &mut Scope<'_>, x: Var, gain: Var, shift: Var, eps: f64) -> Result<Var> {
    let z = s.graph.standardize(x, eps);
    let scaled = s.graph.mul(z, gain)?;
    s.graph.add(scaled, shift)
}

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

/// Batch normalization over every axis but the trailing feature axis.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gain: ParamId,
    pub shift: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub features: usize,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(params: &mut ParamSet, name: &str, features: usize) -> Self {
        Self {
            gain: params.add(format!("{name}.gain"), Tensor::ones(&[features]), true),
            shift: params.add(format!("{name}.shift"), Tensor::zeros(&[features]), true),
            running_mean: params.add(
                format!("{name}.running_mean"),
                Tensor::zeros(&[features]),
                false,
            ),
            running_var: params.add(
                format!("{name}.running_var"),
                Tensor::ones(&[features]),
                false,
            ),
            features,
            eps: BATCH_NORM_EPS,
            momentum: BATCH_NORM_MOMENTUM,
        }
    }

    /// gain, shift, running mean and running variance.
    pub fn param_count(&self) -> usize {
        4 * self.features
    }

    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        check_trailing("batch_norm", &shape, self.features)?;
        let normalized = if s.mode().batch_stats {
            if shape[0] < 2 {
                return Err(Error::Contract(
                    "batch_norm in train mode needs a batch of at least 2".into(),
                ));
            }
            let (z, mean, var) = s.graph.standardize_columns(x, self.eps);
            s.record_update(RunningUpdate {
                mean: self.running_mean,
                var: self.running_var,
                momentum: self.momentum,
                batch_mean: mean,
                batch_var: var,
            });
            z
        } else {
            let params = s.params();
            let mean = params.get(self.running_mean).clone();
            let inv = params
                .get(self.running_var)
                .map(|v| 1.0 / (v + self.eps).sqrt());
            let mean = s.input(mean);
            let inv = s.input(inv);
            let centered = s.graph.sub(x, mean)?;
            s.graph.mul(centered, inv)?
        };
        let gain = s.param(self.gain);
        let shift = s.param(self.shift);
        let scaled = s.graph.mul(normalized, gain)?;
        s.graph.add(scaled, shift)
    }
}

/// Inverted dropout.
#[derive(Debug, Clone, Copy)]
pub struct DropoutLayer {
    pub rate: f64,
}

pub const DEFAULT_DROPOUT: f64 = 0.2;

impl DropoutLayer {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config("dropout", format!("rate {rate} not in [0, 1)")));
        }
        Ok(Self { rate })
    }

    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        if !s.mode().dropout || self.rate == 0.0 {
            return Ok(x);
        }
        let shape = s.graph.shape(x).to_vec();
        let keep = 1.0 / (1.0 - self.rate);
        let rate = self.rate;
        let mut mask = Tensor::zeros(&shape);
        for m in mask.data_mut() {
            *m = if s.rng().random::<f64>() < rate { 0.0 } else { keep };
        }
        let mask = s.input(mask);
        s.graph.mul(x, mask)
    }
}

/// Per-feature attention over time: permute, `Dense(T -> T)`, softmax over
/// time, permute back, and gate the input.
#[derive(Debug, Clone)]
pub struct TemporalAttention {
    pub dense: DenseLayer,
    pub steps: usize,
}

impl TemporalAttention {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, steps: usize, rng: &mut R) -> Self {
        Self {
            dense: DenseLayer::new(params, &format!("{name}.dense"), steps, steps, rng),
            steps,
        }
    }

    pub fn param_count(&self) -> usize {
        self.dense.param_count()
    }

    /// Returns the gated output and the `[batch, T, d]` weights.
    pub fn forward_with_weights(&self, s: &mut Scope<'_>, x: Var) -> Result<(Var, Var)> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != self.steps {
            return Err(Error::dim(
                "temporal_attention",
                format!("expected [batch, {}, d], got {shape:?}", self.steps),
            ));
        }
        let per_feature = s.graph.permute(x, &[0, 2, 1])?;
        s.trace("permute", per_feature);
        let logits = self.dense.forward(s, per_feature)?;
        s.trace("attention_dense", logits);
        let weights = s.graph.softmax(logits, 2)?;
        let weights = s.graph.permute(weights, &[0, 2, 1])?;
        s.trace("permute", weights);
        let out = s.graph.mul(x, weights)?;
        s.trace("multiply", out);
        Ok((out, weights))
    }

    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        Ok(self.forward_with_weights(s, x)?.0)
    }
}
