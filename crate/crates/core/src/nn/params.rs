use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    /// Running statistics (batch-norm) are stored here but never optimized.
    pub trainable: bool,
}

/// Registry of every tensor a model owns, in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry {
            name,
            tensor,
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.tensor.len())
            .sum()
    }

    /// Replace every tensor, checking names and shapes line up.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        if other.entries.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            if dst.name != src.name || dst.tensor.shape() != src.tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` {:?} does not match `{}` {:?}",
                    src.name,
                    src.tensor.shape(),
                    dst.name,
                    dst.tensor.shape()
                )));
            }
            dst.tensor = src.tensor.clone();
        }
        Ok(())
    }

    pub fn apply_running_updates(&mut self, updates: &[RunningUpdate]) {
        for u in updates {
            let m = u.momentum;
            for (r, b) in self.entries[u.mean.0].tensor.data_mut().iter_mut().zip(&u.batch_mean) {
                *r = m * *r + (1.0 - m) * b;
            }
            for (r, b) in self.entries[u.var.0].tensor.data_mut().iter_mut().zip(&u.batch_var) {
                *r = (m * *r + (1.0 - m) * b).max(0.0);
            }
        }
    }
}

/// Batch statistics to fold into a batch-norm layer's running aggregates.
#[derive(Debug, Clone)]
pub struct RunningUpdate {
    pub mean: ParamId,
    pub var: ParamId,
    pub momentum: f64,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

/// Forward-pass behavior switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    /// Apply dropout masks.
    pub dropout: bool,
    /// Normalize batch-norm layers by batch statistics (and record running updates).
    pub batch_stats: bool,
}

impl Mode {
    pub const TRAIN: Mode = Mode {
        dropout: true,
        batch_stats: true,
    };
    pub const INFER: Mode = Mode {
        dropout: false,
        batch_stats: false,
    };
}

/// One recorded stage output shape; the batch axis is printed as `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageShape {
    pub stage: String,
    pub shape: Vec<usize>,
}

impl StageShape {
    pub fn display_shape(&self) -> String {
        let rest: Vec<String> = self.shape[1..].iter().map(usize::to_string).collect();
        if rest.is_empty() {
            "(None)".to_string()
        } else {
            format!("(None, {})", rest.join(", "))
        }
    }
}

/// A forward pass in progress: the tape plus bindings of model parameters.
pub struct Scope<'p> {
    pub graph: Graph,
    params: &'p ParamSet,
    bound: Vec<Option<Var>>,
    mode: Mode,
    rng: ChaCha8Rng,
    updates: Vec<RunningUpdate>,
    trace: Option<Vec<StageShape>>,
}

impl<'p> Scope<'p> {
    pub fn new(params: &'p ParamSet, mode: Mode, seed: u64) -> Self {
        Self {
            graph: Graph::new(),
            params,
            bound: vec![None; params.len()],
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            updates: Vec::new(),
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    /// Bind a parameter onto the tape (once per scope).
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let entry = &self.params.entries[id.0];
        let v = if entry.trainable {
            self.graph.leaf(entry.tensor.clone())
        } else {
            self.graph.constant(entry.tensor.clone())
        };
        self.bound[id.0] = Some(v);
        v
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.graph.constant(t)
    }

    pub(crate) fn record_update(&mut self, u: RunningUpdate) {
        self.updates.push(u);
    }

    pub fn running_updates(&self) -> &[RunningUpdate] {
        &self.updates
    }

    pub fn trace(&mut self, stage: &str, v: Var) {
        if let Some(t) = self.trace.as_mut() {
            t.push(StageShape {
                stage: stage.to_string(),
                shape: self.graph.shape(v).to_vec(),
            });
        }
    }

    pub fn take_trace(&mut self) -> Vec<StageShape> {
        self.trace.take().unwrap_or_default()
    }

    /// Gradient per registry entry (`None` for unused or non-trainable tensors).
    pub fn param_grads(&self, grads: &mut Gradients) -> Vec<Option<Tensor>> {
        self.bound
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let v = (*v)?;
                if !self.params.entries[i].trainable {
                    return None;
                }
                let data = grads.take(v)?;
                Some(Tensor::from_parts(
                    self.params.entries[i].tensor.shape().to_vec(),
                    data,
                ))
            })
            .collect()
    }
}
