//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only list of recorded operations. Every operation
//! returns a [`Var`], a copyable handle into the graph; since a node can only
//! refer to earlier nodes the list is always in topological order, and
//! [`Graph::backward`] walks it once in reverse.
//!
//! ```
//! use hybridcast::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let w = g.leaf(Tensor::from_vec(vec![3.0]));
//! let sq = g.mul(w, w).unwrap();
//! let loss = g.sum(sq);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.wrt(&g, w).data(), &[6.0]);
//! ```

use crate::error::{Error, Result};
use crate::tensor::{
    broadcast_shapes, broadcast_strides, for_each_broadcast, numel, reduce_to_shape, MatmulPlan,
    Tensor,
};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Neg,
    Relu,
    Sigmoid,
    Tanh,
    Exp,
    Silu,
    Square,
    Sqrt,
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Neg => -x,
            Unary::Relu => x.max(0.0),
            Unary::Sigmoid => sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Exp => x.exp(),
            Unary::Silu => x * sigmoid(x),
            Unary::Square => x * x,
            Unary::Sqrt => x.sqrt(),
        }
    }

    /// Local derivative given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Neg => -1.0,
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Tanh => 1.0 - y * y,
            Unary::Exp => y,
            Unary::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Unary::Square => 2.0 * x,
            Unary::Sqrt => 0.5 / y,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var, MatmulPlan),
    Sum(Var),
    SumAxis { x: Var, axis: usize },
    Softmax { x: Var, axis: usize },
    Permute { x: Var, perm: Vec<usize> },
    Reshape(Var),
    Concat { xs: Vec<Var>, axis: usize },
    Narrow { x: Var, axis: usize, start: usize },
    /// Normalize every slice along the last axis (`rows` = slices).
    Standardize { x: Var, inv_std: Vec<f64> },
    /// Normalize every feature (last axis) across all leading positions.
    StandardizeColumns { x: Var, inv_std: Vec<f64> },
    /// `y[.., i, j] = f_j(x[.., i])`; `deriv` holds `f_j'(x[.., i])`.
    Featurize { x: Var, deriv: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation graph (the tape).
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when no path connects it to the loss.
    pub fn get(&self, g: &Graph, v: Var) -> Option<Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref).map(|d| {
            Tensor::from_parts(g.value(v).shape().to_vec(), d.clone())
        })
    }

    /// Gradient for `v`, zeros when unused.
    pub fn wrt(&self, g: &Graph, v: Var) -> Tensor {
        self.get(g, v)
            .unwrap_or_else(|| Tensor::zeros(g.value(v).shape()))
    }

    pub(crate) fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

fn check_axis(op: &str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::dim(op, format!("axis {axis} out of range for shape {shape:?}")));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf: receives a gradient in [`Graph::backward`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let name = match kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        };
        let (va, vb) = (self.value(a), self.value(b));
        let f = |x: f64, y: f64| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        };
        let value = if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::from_parts(va.shape().to_vec(), data)
        } else {
            let out = broadcast_shapes(name, va.shape(), vb.shape())?;
            let sa = broadcast_strides(va.shape(), &out);
            let sb = broadcast_strides(vb.shape(), &out);
            let mut data = vec![0.0; numel(&out)];
            let (da, db) = (va.data(), vb.data());
            for_each_broadcast(&out, &sa, &sb, |k, oa, ob| data[k] = f(da[oa], db[ob]));
            Tensor::from_parts(out, data)
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Binary(kind, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    pub fn unary(&mut self, kind: Unary, x: Var) -> Var {
        let value = self.value(x).map(|v| kind.apply(v));
        let rg = self.rg(x);
        self.push(value, Op::Unary(kind, x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(Unary::Relu, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Unary::Tanh, x)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(Unary::Exp, x)
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.unary(Unary::Silu, x)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(Unary::Square, x)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(Unary::Neg, x)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| v * c);
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, c), rg)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| v + c);
        let rg = self.rg(x);
        self.push(value, Op::AddScalar(x), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let plan = MatmulPlan::new(self.value(a).shape(), self.value(b).shape())?;
        let mut out = vec![0.0; numel(&plan.out_shape)];
        plan.forward(self.value(a).data(), self.value(b).data(), &mut out);
        let value = Tensor::from_parts(plan.out_shape.clone(), out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b, plan), rg))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(value, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        check_axis("sum_axis", &shape, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    out[o * inner + i] += src[base + i];
                }
            }
        }
        let mut oshape = shape;
        oshape[axis] = 1;
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(oshape, out), Op::SumAxis { x, axis }, rg))
    }

    /// Numerically stabilized softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        check_axis("softmax", &shape, axis)?;
        let value = softmax_values(self.value(x), axis);
        let rg = self.rg(x);
        Ok(self.push(value, Op::Softmax { x, axis }, rg))
    }

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let value = self.value(x).permute(perm)?;
        let rg = self.rg(x);
        Ok(self.push(
            value,
            Op::Permute {
                x,
                perm: perm.to_vec(),
            },
            rg,
        ))
    }

    /// Swap the last two axes.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let r = self.value(x).rank();
        if r < 2 {
            return Err(Error::dim("transpose", "need rank >= 2"));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 1, r - 2);
        self.permute(x, &perm)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::dim("concat", "no inputs"))?;
        let base = self.value(*first).shape().to_vec();
        check_axis("concat", &base, axis)?;
        let mut total = 0;
        for &v in xs {
            let s = self.value(v).shape();
            let same_rank = s.len() == base.len();
            if !same_rank || s.iter().enumerate().any(|(i, &e)| i != axis && e != base[i]) {
                return Err(Error::dim(
                    "concat",
                    format!("shape {s:?} incompatible with {base:?} along axis {axis}"),
                ));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut oshape = base;
        oshape[axis] = total;
        let rg = xs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::from_parts(oshape, out),
            Op::Concat {
                xs: xs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        check_axis("narrow", &shape, axis)?;
        if len == 0 || start + len > shape[axis] {
            return Err(Error::dim(
                "narrow",
                format!("range {start}..{} outside axis {axis} of {shape:?}", start + len),
            ));
        }
        let (outer, full, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let b = (o * full + start) * inner;
            out.extend_from_slice(&src[b..b + len * inner]);
        }
        let mut oshape = shape;
        oshape[axis] = len;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(oshape, out),
            Op::Narrow { x, axis, start },
            rg,
        ))
    }

    /// `(x - mean) / sqrt(var + eps)` over each slice along the last axis.
    pub fn standardize(&mut self, x: Var, eps: f64) -> Var {
        let t = self.value(x);
        let d = *t.shape().last().expect("rank >= 1");
        let rows = t.len() / d;
        let mut out = vec![0.0; t.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let s = &t.data()[r * d..(r + 1) * d];
            let mean = s.iter().sum::<f64>() / d as f64;
            let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            for (o, v) in out[r * d..(r + 1) * d].iter_mut().zip(s) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let value = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.rg(x);
        self.push(value, Op::Standardize { x, inv_std }, rg)
    }

    /// Per-feature standardization across all leading positions; also returns
    /// the (biased) feature means and variances used.
    pub fn standardize_columns(&mut self, x: Var, eps: f64) -> (Var, Vec<f64>, Vec<f64>) {
        let t = self.value(x);
        let f = *t.shape().last().expect("rank >= 1");
        let rows = t.len() / f;
        let data = t.data();
        let mut mean = vec![0.0; f];
        for r in 0..rows {
            for j in 0..f {
                mean[j] += data[r * f + j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; f];
        for r in 0..rows {
            for j in 0..f {
                let c = data[r * f + j] - mean[j];
                var[j] += c * c;
            }
        }
        var.iter_mut().for_each(|v| *v /= rows as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut out = vec![0.0; t.len()];
        for r in 0..rows {
            for j in 0..f {
                out[r * f + j] = (data[r * f + j] - mean[j]) * inv_std[j];
            }
        }
        let value = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.rg(x);
        let v = self.push(value, Op::StandardizeColumns { x, inv_std }, rg);
        (v, mean, var)
    }

    /// Expand every scalar of `x` into `width` features: output shape is
    /// `x.shape + [width]`. `f(t, values, derivs)` fills both slices.
    pub fn featurize(
        &mut self,
        x: Var,
        width: usize,
        mut f: impl FnMut(f64, &mut [f64], &mut [f64]),
    ) -> Var {
        let t = self.value(x);
        let n = t.len();
        let mut out = vec![0.0; n * width];
        let mut deriv = vec![0.0; n * width];
        for (i, &v) in t.data().iter().enumerate() {
            f(
                v,
                &mut out[i * width..(i + 1) * width],
                &mut deriv[i * width..(i + 1) * width],
            );
        }
        let mut shape = t.shape().to_vec();
        shape.push(width);
        let rg = self.rg(x);
        self.push(Tensor::from_parts(shape, out), Op::Featurize { x, deriv }, rg)
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &gout, &mut grads);
            grads[idx] = Some(gout);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, gout: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.rg(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.value(v).len()]);
            f(slot);
        };
        let out_shape = node.value.shape();
        match &node.op {
            Op::Leaf => {}
            Op::Binary(kind, a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let same = va.shape() == vb.shape();
                let sa = broadcast_strides(va.shape(), out_shape);
                let sb = broadcast_strides(vb.shape(), out_shape);
                let (da, db) = (va.data(), vb.data());
                match kind {
                    Binary::Add | Binary::Sub => {
                        acc(*a, &mut |g| {
                            let r = reduce_to_shape(gout, out_shape, va.shape());
                            g.iter_mut().zip(&r).for_each(|(g, r)| *g += r);
                        });
                        let sign = if *kind == Binary::Add { 1.0 } else { -1.0 };
                        acc(*b, &mut |g| {
                            let r = reduce_to_shape(gout, out_shape, vb.shape());
                            g.iter_mut().zip(&r).for_each(|(g, r)| *g += sign * r);
                        });
                    }
                    Binary::Mul => {
                        acc(*a, &mut |g| {
                            if same {
                                for k in 0..gout.len() {
                                    g[k] += gout[k] * db[k];
                                }
                            } else {
                                for_each_broadcast(out_shape, &sa, &sb, |k, oa, ob| {
                                    g[oa] += gout[k] * db[ob]
                                });
                            }
                        });
                        acc(*b, &mut |g| {
                            if same {
                                for k in 0..gout.len() {
                                    g[k] += gout[k] * da[k];
                                }
                            } else {
                                for_each_broadcast(out_shape, &sa, &sb, |k, oa, ob| {
                                    g[ob] += gout[k] * da[oa]
                                });
                            }
                        });
                    }
                    Binary::Div => {
                        acc(*a, &mut |g| {
                            for_each_broadcast(out_shape, &sa, &sb, |k, oa, ob| {
                                g[oa] += gout[k] / db[ob]
                            });
                        });
                        acc(*b, &mut |g| {
                            for_each_broadcast(out_shape, &sa, &sb, |k, oa, ob| {
                                g[ob] -= gout[k] * da[oa] / (db[ob] * db[ob])
                            });
                        });
                    }
                }
            }
            Op::Unary(kind, x) => {
                let xv = self.value(*x).data();
                let yv = node.value.data();
                acc(*x, &mut |g| {
                    for k in 0..gout.len() {
                        g[k] += gout[k] * kind.derivative(xv[k], yv[k]);
                    }
                });
            }
            Op::Scale(x, c) => acc(*x, &mut |g| {
                g.iter_mut().zip(gout).for_each(|(g, o)| *g += c * o)
            }),
            Op::AddScalar(x) | Op::Reshape(x) => acc(*x, &mut |g| {
                g.iter_mut().zip(gout).for_each(|(g, o)| *g += o)
            }),
            Op::MatMul(a, b, plan) => {
                let (da, db) = (self.value(*a).data(), self.value(*b).data());
                // Each side is accumulated separately so that `a == b` works.
                acc(*a, &mut |g| plan.backward(da, db, gout, Some(g), None));
                acc(*b, &mut |g| plan.backward(da, db, gout, None, Some(g)));
            }
            Op::Sum(x) => acc(*x, &mut |g| g.iter_mut().for_each(|g| *g += gout[0])),
            Op::SumAxis { x, axis } => {
                let shape = self.value(*x).shape();
                let (outer, len, inner) = split_axis(shape, *axis);
                acc(*x, &mut |g| {
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                g[(o * len + l) * inner + i] += gout[o * inner + i];
                            }
                        }
                    }
                });
            }
            Op::Softmax { x, axis } => {
                let y = node.value.data();
                let (outer, len, inner) = split_axis(out_shape, *axis);
                acc(*x, &mut |g| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |l: usize| (o * len + l) * inner + i;
                            let dot: f64 = (0..len).map(|l| gout[at(l)] * y[at(l)]).sum();
                            for l in 0..len {
                                g[at(l)] += y[at(l)] * (gout[at(l)] - dot);
                            }
                        }
                    }
                });
            }
            Op::Permute { x, perm } => {
                let mut inv = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inv[p] = i;
                }
                let back = Tensor::from_parts(out_shape.to_vec(), gout.to_vec())
                    .permute(&inv)
                    .expect("inverse permutation");
                acc(*x, &mut |g| {
                    g.iter_mut().zip(back.data()).for_each(|(g, o)| *g += o)
                });
            }
            Op::Concat { xs, axis } => {
                let (outer, total, inner) = split_axis(out_shape, *axis);
                let mut offset = 0;
                for &v in xs {
                    let len = self.value(v).shape()[*axis];
                    acc(v, &mut |g| {
                        for o in 0..outer {
                            let src = (o * total + offset) * inner;
                            let dst = o * len * inner;
                            for k in 0..len * inner {
                                g[dst + k] += gout[src + k];
                            }
                        }
                    });
                    offset += len;
                }
            }
            Op::Narrow { x, axis, start } => {
                let shape = self.value(*x).shape();
                let (outer, full, inner) = split_axis(shape, *axis);
                let len = out_shape[*axis];
                acc(*x, &mut |g| {
                    for o in 0..outer {
                        let dst = (o * full + start) * inner;
                        let src = o * len * inner;
                        for k in 0..len * inner {
                            g[dst + k] += gout[src + k];
                        }
                    }
                });
            }
            Op::Standardize { x, inv_std } => {
                let y = node.value.data();
                let d = *out_shape.last().expect("rank");
                acc(*x, &mut |g| {
                    for (r, &is) in inv_std.iter().enumerate() {
                        let gs = &gout[r * d..(r + 1) * d];
                        let ys = &y[r * d..(r + 1) * d];
                        let mg = gs.iter().sum::<f64>() / d as f64;
                        let mgy = gs.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            g[r * d + j] += is * (gs[j] - mg - ys[j] * mgy);
                        }
                    }
                });
            }
            Op::StandardizeColumns { x, inv_std } => {
                let y = node.value.data();
                let f = inv_std.len();
                let rows = y.len() / f;
                let mut mg = vec![0.0; f];
                let mut mgy = vec![0.0; f];
                for r in 0..rows {
                    for j in 0..f {
                        mg[j] += gout[r * f + j];
                        mgy[j] += gout[r * f + j] * y[r * f + j];
                    }
                }
                acc(*x, &mut |g| {
                    for r in 0..rows {
                        for j in 0..f {
                            let k = r * f + j;
                            g[k] += inv_std[j]
                                * (gout[k] - mg[j] / rows as f64 - y[k] * mgy[j] / rows as f64);
                        }
                    }
                });
            }
            Op::Featurize { x, deriv } => {
                let width = *out_shape.last().expect("rank");
                acc(*x, &mut |g| {
                    for (i, gi) in g.iter_mut().enumerate() {
                        let base = i * width;
                        *gi += (0..width).map(|j| gout[base + j] * deriv[base + j]).sum::<f64>();
                    }
                });
            }
        }
    }
}

pub(crate) fn softmax_values(t: &Tensor, axis: usize) -> Tensor {
    let (outer, len, inner) = split_axis(t.shape(), axis);
    let src = t.data();
    let mut out = vec![0.0; t.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |l: usize| (o * len + l) * inner + i;
            let max = (0..len).map(|l| src[at(l)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for l in 0..len {
                let e = (src[at(l)] - max).exp();
                out[at(l)] = e;
                total += e;
            }
            for l in 0..len {
                out[at(l)] /= total;
            }
        }
    }
    Tensor::from_parts(t.shape().to_vec(), out)
}
