//! Transformer encoder layer: multi-head scaled dot-product self-attention
//! followed by a position-wise feed-forward network, each wrapped in a
//! residual connection and post-layer-normalization.

use rand::Rng;

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nn::{check_trailing, glorot_bound, LayerNorm, ParamId, ParamSet, Scope};
use crate::tensor::Tensor;

/// Projections of one attention head.
#[derive(Debug, Clone)]
pub struct HeadProjections {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub d_model: usize,
    pub heads: usize,
    pub d_k: usize,
    pub projections: Vec<HeadProjections>,
    /// `[heads * d_k, d_model]`
    pub output: ParamId,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::config(
                "heads",
                format!("d_model {d_model} is not divisible by {heads} heads"),
            ));
        }
        let d_k = d_model / heads;
        let bound = glorot_bound(d_model, d_k);
        let projections = (0..heads)
            .map(|i| {
                let mut proj = |kind: &str| {
                    params.add(
                        format!("{name}.head{i}.{kind}"),
                        Tensor::uniform(&[d_model, d_k], bound, rng),
                        true,
                    )
                };
                HeadProjections {
                    query: proj("w_q"),
                    key: proj("w_k"),
                    value: proj("w_v"),
                }
            })
            .collect();
        let output = params.add(
            format!("{name}.w_o"),
            Tensor::uniform(&[heads * d_k, d_model], glorot_bound(heads * d_k, d_model), rng),
            true,
        );
        Ok(Self {
            d_model,
            heads,
            d_k,
            projections,
            output,
        })
    }

    pub fn param_count(&self) -> usize {
        3 * self.heads * self.d_model * self.d_k + self.heads * self.d_k * self.d_model
    }

    /// Attention output together with each head's `[batch, T, T]` weights.
    pub fn attend_with_weights(&self, s: &mut Scope<'_>, x: Var) -> Result<(Var, Vec<Var>)> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 {
            return Err(Error::dim("attend", format!("expected [batch, T, d_model], got {shape:?}")));
        }
        check_trailing("attend", &shape, self.d_model)?;
        let scale = 1.0 / (self.d_k as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for p in &self.projections {
            let (wq, wk, wv) = (s.param(p.query), s.param(p.key), s.param(p.value));
            let q = s.graph.matmul(x, wq)?;
            let k = s.graph.matmul(x, wk)?;
            let v = s.graph.matmul(x, wv)?;
            let kt = s.graph.transpose(k)?;
            let logits = s.graph.matmul(q, kt)?;
            let logits = s.graph.scale(logits, scale);
            let a = s.graph.softmax(logits, 2)?;
            heads.push(s.graph.matmul(a, v)?);
            weights.push(a);
        }
        let z = s.graph.concat(&heads, 2)?;
        let wo = s.param(self.output);
        Ok((s.graph.matmul(z, wo)?, weights))
    }

    pub fn attend(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        Ok(self.attend_with_weights(s, x)?.0)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub d_model: usize,
    pub hidden: usize,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = glorot_bound(d_model, hidden);
        Self {
            w1: params.add(format!("{name}.w1"), Tensor::uniform(&[d_model, hidden], bound, rng), true),
            b1: params.add(format!("{name}.b1"), Tensor::zeros(&[hidden]), true),
            w2: params.add(format!("{name}.w2"), Tensor::uniform(&[hidden, d_model], bound, rng), true),
            b2: params.add(format!("{name}.b2"), Tensor::zeros(&[d_model]), true),
            d_model,
            hidden,
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.d_model * self.hidden + self.hidden + self.d_model
    }

    /// `max(0, x·W1 + b1)·W2 + b2`, position-wise.
    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        check_trailing("ffn", s.graph.shape(x), self.d_model)?;
        let (w1, b1, w2, b2) = (s.param(self.w1), s.param(self.b1), s.param(self.w2), s.param(self.b2));
        let h = s.graph.matmul(x, w1)?;
        let h = s.graph.add(h, b1)?;
        let h = s.graph.relu(h);
        let o = s.graph.matmul(h, w2)?;
        s.graph.add(o, b2)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub ffn: FeedForward,
    pub norm1: LayerNorm,
    pub norm2: LayerNorm,
}

impl EncoderLayer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        heads: usize,
        ffn_hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            attention: MultiHeadAttention::new(params, &format!("{name}.attn"), d_model, heads, rng)?,
            ffn: FeedForward::new(params, &format!("{name}.ffn"), d_model, ffn_hidden, rng),
            norm1: LayerNorm::new(params, &format!("{name}.norm1"), d_model),
            norm2: LayerNorm::new(params, &format!("{name}.norm2"), d_model),
        })
    }

    pub fn param_count(&self) -> usize {
        self.attention.param_count()
            + self.ffn.param_count()
            + self.norm1.param_count()
            + self.norm2.param_count()
    }

    /// `out1 = LN(x + attend(x))`, `out = LN(out1 + ffn(out1))`.
    pub fn encode(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        let a = self.attention.attend(s, x)?;
        let r1 = s.graph.add(x, a)?;
        let out1 = self.norm1.forward(s, r1)?;
        let f = self.ffn.forward(s, out1)?;
        let r2 = s.graph.add(out1, f)?;
        self.norm2.forward(s, r2)
    }
}
