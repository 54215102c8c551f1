//! Kolmogorov–Arnold layers: one learnable univariate B-spline function per
//! edge, with plain summation at the nodes.
//!
//! Each edge function is
//!
//! ```text
//! f(t) = base_weight · silu(t) + Σ_b coefficient_b · B_b(t)
//! ```
//!
//! where `B_b` are degree-`k` B-spline basis functions over a grid of `G`
//! intervals extended by `k` knots on both sides, giving `G + k` basis
//! functions. Inputs outside the grid are clamped to its boundary.
//!
//! A layer evaluates every edge at once: the basis expansion of the input
//! (`[.., in, G + k]`) is contracted with the coefficient tensor
//! (`[in, G + k, out]`) in a single matrix product.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Var};
use crate::error::{Error, Result};
use crate::nn::{check_trailing, glorot_bound, ParamId, ParamSet, Scope};
use crate::tensor::Tensor;

pub const DEFAULT_GRID_INTERVALS: usize = 5;
pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_RANGE: (f64, f64) = (-2.0, 2.0);
pub const COEFFICIENT_INIT_STD: f64 = 0.1;

/// Knot grid shared by every edge of a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineGrid {
    degree: usize,
    /// The `G + 1` grid points.
    points: Vec<f64>,
    /// Grid points extended by `degree` knots on each side.
    knots: Vec<f64>,
}

impl SplineGrid {
    /// Uniform grid of `intervals` cells over `[lo, hi]`.
    pub fn uniform(intervals: usize, degree: usize, lo: f64, hi: f64) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::config("kan.grid", "need at least one interval"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("kan.range", format!("invalid range [{lo}, {hi}]")));
        }
        let h = (hi - lo) / intervals as f64;
        let mut points: Vec<f64> = (0..=intervals).map(|i| lo + i as f64 * h).collect();
        points[intervals] = hi;
        Self::from_points(points, degree)
    }

    /// Grid from explicit points; the extension repeats the boundary spacing.
    pub fn from_points(points: Vec<f64>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::config("kan.degree", "degree must be at least 1"));
        }
        if points.len() < 2 {
            return Err(Error::config("kan.grid", "need at least two grid points"));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("kan.grid", "grid points must be finite and strictly ascending"));
        }
        let n = points.len();
        let left = points[1] - points[0];
        let right = points[n - 1] - points[n - 2];
        let mut knots = Vec::with_capacity(n + 2 * degree);
        knots.extend((1..=degree).rev().map(|j| points[0] - j as f64 * left));
        knots.extend_from_slice(&points);
        knots.extend((1..=degree).map(|j| points[n - 1] + j as f64 * right));
        Ok(Self {
            degree,
            points,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    /// Number of basis functions, `G + k`.
    pub fn basis_len(&self) -> usize {
        self.intervals() + self.degree
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index of the first nonzero basis function at `t` (already clamped),
    /// i.e. the grid cell containing `t`.
    fn cell(&self, t: f64) -> usize {
        let g = self.intervals();
        // `partition_point` gives the number of interior points <= t
        let c = self.points[1..g].partition_point(|&p| p <= t);
        c.min(g - 1)
    }

    /// Nonzero basis values at `t` for degree `degree`, written to `out[0..=degree]`;
    /// returns the index of the first one.
    fn local_basis(&self, t: f64, degree: usize, out: &mut [f64]) -> usize {
        let cell = self.cell(t);
        // knot span [knots[span], knots[span + 1]) in the extended vector
        let span = cell + self.degree;
        let u = &self.knots;
        let mut left = [0.0f64; 16];
        let mut right = [0.0f64; 16];
        out[0] = 1.0;
        for j in 1..=degree {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        span - degree
    }

    /// All `G + k` basis values at `t` and their derivatives with respect to `t`.
    ///
    /// `t` outside the grid is clamped, so the derivatives there are zero.
    pub fn basis_with_derivative(&self, t: f64, values: &mut [f64], derivs: &mut [f64]) {
        assert!(self.degree < 15, "degree too large");
        let (lo, hi) = self.range();
        let inside = (lo..=hi).contains(&t);
        let tc = t.clamp(lo, hi);
        values.iter_mut().for_each(|v| *v = 0.0);
        derivs.iter_mut().for_each(|v| *v = 0.0);
        let k = self.degree;
        let mut local = [0.0f64; 16];
        let first = self.local_basis(tc, k, &mut local);
        values[first..=first + k].copy_from_slice(&local[..=k]);
        if !inside {
            return;
        }
        // dB_{j,k} = k/(u_{j+k}-u_j) B_{j,k-1} - k/(u_{j+k+1}-u_{j+1}) B_{j+1,k-1}
        let mut lower = [0.0f64; 16];
        let lfirst = self.local_basis(tc, k - 1, &mut lower);
        debug_assert_eq!(lfirst, first + 1);
        let u = &self.knots;
        let lower_at = |j: usize| -> f64 {
            if j >= lfirst && j < lfirst + k {
                lower[j - lfirst]
            } else {
                0.0
            }
        };
        for j in first..=first + k {
            let a = k as f64 / (u[j + k] - u[j]) * lower_at(j);
            let b = k as f64 / (u[j + k + 1] - u[j + 1]) * lower_at(j + 1);
            derivs[j] = a - b;
        }
    }

    pub fn basis(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.basis_len()];
        let mut d = vec![0.0; self.basis_len()];
        self.basis_with_derivative(t, &mut v, &mut d);
        v
    }
}

/// Cox–de Boor basis at `t` (free-standing form over the grid's knots).
pub fn bspline_basis(t: f64, grid: &SplineGrid) -> Vec<f64> {
    grid.basis(t)
}

pub fn silu(t: f64) -> f64 {
    t * sigmoid(t)
}

/// A single edge function, detached from any layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFunction {
    pub grid: SplineGrid,
    pub coefficients: Vec<f64>,
    pub base_weight: f64,
}

impl SplineFunction {
    pub fn new(grid: SplineGrid, coefficients: Vec<f64>, base_weight: f64) -> Result<Self> {
        if coefficients.len() != grid.basis_len() {
            return Err(Error::dim(
                "spline_function",
                format!("need {} coefficients, got {}", grid.basis_len(), coefficients.len()),
            ));
        }
        Ok(Self {
            grid,
            coefficients,
            base_weight,
        })
    }

    /// `base_weight · silu(t) + Σ coefficients · basis(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let basis = self.grid.basis(t);
        self.base_weight * silu(t)
            + basis
                .iter()
                .zip(&self.coefficients)
                .map(|(b, c)| b * c)
                .sum::<f64>()
    }
}

pub fn edge_eval(f: &SplineFunction, t: f64) -> f64 {
    f.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KanSpec {
    pub intervals: usize,
    pub degree: usize,
    pub range: (f64, f64),
    /// Include the `silu` residual term on every edge.
    pub base_term: bool,
}

impl Default for KanSpec {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_GRID_INTERVALS,
            degree: DEFAULT_DEGREE,
            range: DEFAULT_RANGE,
            base_term: true,
        }
    }
}

/// One function matrix `Φ` of shape `in × out`.
#[derive(Debug, Clone)]
pub struct KanLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub grid: SplineGrid,
    /// `[in, G + k, out]`
    pub coefficients: ParamId,
    /// `[in, out]`, absent in pure-spline mode.
    pub base: Option<ParamId>,
}

impl KanLayer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        outputs: usize,
        spec: &KanSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let grid = SplineGrid::uniform(spec.intervals, spec.degree, spec.range.0, spec.range.1)?;
        let nb = grid.basis_len();
        let coefficients = params.add(
            format!("{name}.coefficients"),
            Tensor::normal(&[inputs, nb, outputs], COEFFICIENT_INIT_STD, rng),
            true,
        );
        let base = spec.base_term.then(|| {
            params.add(
                format!("{name}.base"),
                Tensor::uniform(&[inputs, outputs], glorot_bound(inputs, outputs), rng),
                true,
            )
        });
        Ok(Self {
            inputs,
            outputs,
            grid,
            coefficients,
            base,
        })
    }

    pub fn param_count(&self) -> usize {
        let edges = self.inputs * self.outputs;
        edges * self.grid.basis_len() + if self.base.is_some() { edges } else { 0 }
    }

    /// The function on edge `input -> output`.
    pub fn edge(&self, params: &ParamSet, input: usize, output: usize) -> SplineFunction {
        let nb = self.grid.basis_len();
        let c = params.get(self.coefficients);
        let coefficients = (0..nb).map(|b| c.at(&[input, b, output])).collect();
        let base_weight = self.base.map_or(0.0, |id| params.get(id).at(&[input, output]));
        SplineFunction {
            grid: self.grid.clone(),
            coefficients,
            base_weight,
        }
    }

    /// `out_j = Σ_i f_ij(x_i)`; no activation at the nodes.
    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        check_trailing("kan", &shape, self.inputs)?;
        let rows = shape.iter().product::<usize>() / self.inputs;
        let nb = self.grid.basis_len();
        let grid = &self.grid;
        let basis = s
            .graph
            .featurize(x, nb, |t, v, d| grid.basis_with_derivative(t, v, d));
        let basis = s.graph.reshape(basis, &[rows, self.inputs * nb])?;
        let coef = s.param(self.coefficients);
        let coef = s.graph.reshape(coef, &[self.inputs * nb, self.outputs])?;
        let mut out = s.graph.matmul(basis, coef)?;
        if let Some(base) = self.base {
            let flat = s.graph.reshape(x, &[rows, self.inputs])?;
            let act = s.graph.silu(flat);
            let w = s.param(base);
            let lin = s.graph.matmul(act, w)?;
            out = s.graph.add(out, lin)?;
        }
        let mut oshape = shape;
        *oshape.last_mut().expect("rank >= 1") = self.outputs;
        s.graph.reshape(out, &oshape)
    }
}

/// Stacked layers: `Φ_{L-1} ∘ … ∘ Φ_0`.
#[derive(Debug, Clone)]
pub struct KanNetwork {
    pub layers: Vec<KanLayer>,
}

impl KanNetwork {
    /// `widths` lists every node count, input first: `[1, 8, 1]` is two layers.
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        widths: &[usize],
        spec: &KanSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::config("kan.widths", "need at least input and output widths"));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| KanLayer::new(params, &format!("{name}.{i}"), w[0], w[1], spec, rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(KanLayer::param_count).sum()
    }

    pub fn forward(&self, s: &mut Scope<'_>, x: Var) -> Result<Var> {
        self.layers.iter().try_fold(x, |h, l| l.forward(s, h))
    }
}
