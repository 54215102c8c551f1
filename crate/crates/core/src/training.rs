//! Loss, Adam, the early-stopping fit loop and rolling-origin cross-validation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::data::{make_windows_with_counts, Normalizer, OhlcvSeries, WindowSpec, WindowedDataset};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, TaskMetrics, ZeroPolicy};
use crate::model::HybridModel;
use crate::nn::{Mode, ParamSet};
use crate::tensor::Tensor;

/// `Σ_k weights[k] · mean((pred_k − target_k)²)`, recorded on the tape.
pub fn weighted_mse(g: &mut Graph, preds: &[Var], targets: &[Var], weights: &[f64]) -> Result<Var> {
    if preds.len() != targets.len() || preds.len() != weights.len() || preds.is_empty() {
        return Err(Error::dim(
            "loss",
            format!(
                "{} predictions, {} targets, {} weights",
                preds.len(),
                targets.len(),
                weights.len()
            ),
        ));
    }
    let mut total: Option<Var> = None;
    for ((&p, &t), &w) in preds.iter().zip(targets).zip(weights) {
        if g.shape(p) != g.shape(t) {
            return Err(Error::dim(
                "loss",
                format!("prediction {:?} vs target {:?}", g.shape(p), g.shape(t)),
            ));
        }
        let d = g.sub(p, t)?;
        let sq = g.square(d);
        let m = g.mean(sq);
        let term = g.scale(m, w);
        total = Some(match total {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one task"))
}

/// Plain-value version of [`weighted_mse`]; also returns each task's MSE.
pub fn weighted_mse_values(preds: &[Tensor], targets: &[Tensor], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    if preds.len() != targets.len() || preds.len() != weights.len() {
        return Err(Error::dim("loss", "task count mismatch".to_string()));
    }
    let mut per_task = Vec::with_capacity(preds.len());
    for (p, t) in preds.iter().zip(targets) {
        if p.shape() != t.shape() || p.is_empty() {
            return Err(Error::dim(
                "loss",
                format!("prediction {:?} vs target {:?}", p.shape(), t.shape()),
            ));
        }
        let m = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        per_task.push(m);
    }
    let total = per_task.iter().zip(weights).map(|(m, w)| m * w).sum();
    Ok((total, per_task))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Relative task weights; empty means equal. Normalized to sum to one.
    pub task_weights: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            task_weights: Vec::new(),
            folds: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("beta1", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta2", "must be in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be positive"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch_size", "must be at least 2 for batch statistics"));
        }
        if self.task_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("task_weights", "weights must be finite and non-negative"));
        }
        if self.folds == 0 {
            return Err(Error::config("folds", "must be positive"));
        }
        Ok(())
    }

    /// Weights for `tasks` tasks, normalized to sum to one.
    pub fn normalized_weights(&self, tasks: usize) -> Result<Vec<f64>> {
        let raw = if self.task_weights.is_empty() {
            vec![1.0; tasks]
        } else if self.task_weights.len() == tasks {
            self.task_weights.clone()
        } else {
            return Err(Error::config(
                "task_weights",
                format!("{} weights for {tasks} tasks", self.task_weights.len()),
            ));
        };
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::config("task_weights", "weights must not all be zero"));
        }
        Ok(raw.iter().map(|w| w / sum).collect())
    }
}

/// First and second moment estimates, one pair per registry entry.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Tensor> = params.entries().iter().map(|e| Tensor::zeros(e.tensor.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    /// One bias-corrected Adam update of every trainable entry.
    pub fn update(&mut self, params: &mut ParamSet, grads: &[Option<Tensor>], cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (i, e) in params.entries_mut().iter_mut().enumerate() {
            if !e.trainable {
                continue;
            }
            let Some(g) = grads.get(i).and_then(Option::as_ref) else {
                continue;
            };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((p, &gk), mk), vk) in e.tensor.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mk = cfg.beta1 * *mk + (1.0 - cfg.beta1) * gk;
                *vk = cfg.beta2 * *vk + (1.0 - cfg.beta2) * gk * gk;
                let mh = *mk / c1;
                let vh = *vk / c2;
                *p -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Absent for epoch 0, the untrained model.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_task_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub tasks: Vec<String>,
    pub task_weights: Vec<f64>,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Split `0..n` into shuffled minibatches; a trailing batch of one joins the previous batch.
pub fn minibatches(n: usize, batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(tail);
    }
    batches
}

pub const EVAL_CHUNK: usize = 256;

/// Normalized-unit validation loss of `model` on `data`.
pub fn evaluate_loss(model: &HybridModel, data: &WindowedDataset, weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    let preds = model.predict(&data.inputs, EVAL_CHUNK)?;
    weighted_mse_values(&preds, &data.targets, weights)
}

/// Run one optimizer step on a batch; returns the batch loss.
pub fn train_step(
    model: &mut HybridModel,
    state: &mut AdamState,
    x: Tensor,
    ys: Vec<Tensor>,
    weights: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    let (loss, grads, updates) = {
        let mut s = crate::nn::Scope::new(model.params(), Mode::TRAIN, seed);
        let xv = s.input(x);
        let preds = model.forward_scope(&mut s, xv)?;
        let targets: Vec<Var> = ys.into_iter().map(|y| s.input(y)).collect();
        let loss = weighted_mse(&mut s.graph, &preds, &targets, weights)?;
        let value = s.graph.value(loss).item()?;
        let mut g = s.graph.backward(loss)?;
        (value, s.param_grads(&mut g), s.running_updates().to_vec())
    };
    if !loss.is_finite() {
        return Ok(loss);
    }
    state.update(model.params_mut(), &grads, cfg);
    model.apply_running_updates(&updates);
    Ok(loss)
}

/// Minibatch Adam with early stopping on validation loss. The parameters of
/// the best epoch (epoch 0 is the untrained model) are restored at the end.
pub fn fit(model: &mut HybridModel, train: &WindowedDataset, val: &WindowedDataset, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if train.len() < 2 {
        return Err(Error::EmptyInput("training needs at least two windows".into()));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("validation split is empty".into()));
    }
    let weights = cfg.normalized_weights(model.tasks().len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(model.params());

    let (v0, t0) = evaluate_loss(model, val, &weights)?;
    let mut epochs = vec![EpochLog {
        epoch: 0,
        train_loss: None,
        val_loss: v0,
        val_task_loss: t0,
    }];
    let mut best = (v0, 0usize, model.params().clone());
    let mut last_finite = v0.is_finite().then_some(v0);
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        for batch in minibatches(train.len(), cfg.batch_size, &mut rng) {
            let (x, ys) = train.batch(&batch);
            let seed = rng.random::<u64>();
            let loss = train_step(model, &mut state, x, ys, &weights, cfg, seed)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    last_finite_loss: last_finite,
                });
            }
            last_finite = Some(loss);
            total += loss * batch.len() as f64;
        }
        let (val_loss, val_task_loss) = evaluate_loss(model, val, &weights)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                last_finite_loss: last_finite,
            });
        }
        epochs.push(EpochLog {
            epoch,
            train_loss: Some(total / train.len() as f64),
            val_loss,
            val_task_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params().clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    model.params_mut().load_from(&best.2)?;
    Ok(TrainLog {
        tasks: model.tasks().to_vec(),
        task_weights: weights,
        epochs,
        best_epoch: best.1,
        best_val_loss: best.0,
        stopped_early,
    })
}

/// Metrics in original units for each target channel.
pub fn evaluate_predictions(
    method: &str,
    data: &WindowedDataset,
    preds: &[Tensor],
    normalizer: &Normalizer,
    policy: ZeroPolicy,
) -> Result<MetricsReport> {
    if preds.len() != data.targets.len() {
        return Err(Error::dim(
            "evaluate",
            format!("{} prediction sets for {} targets", preds.len(), data.targets.len()),
        ));
    }
    let mut tasks = Vec::with_capacity(preds.len());
    for ((p, t), &ch) in preds.iter().zip(&data.targets).zip(&data.target_channels) {
        let actual: Vec<f64> = t.data().iter().map(|&v| normalizer.inverse(ch, v)).collect();
        let predicted: Vec<f64> = p.data().iter().map(|&v| normalizer.inverse(ch, v)).collect();
        tasks.push(TaskMetrics::compute(ch.as_str(), &actual, &predicted, policy)?);
    }
    Ok(MetricsReport {
        method: method.to_string(),
        tasks,
    })
}

/// Anything that can be fit on windows and produce per-task predictions in
/// normalized units.
pub trait Forecaster {
    fn fit(&mut self, train: &WindowedDataset, val: &WindowedDataset, cfg: &TrainConfig) -> Result<Option<TrainLog>>;
    fn predict(&self, data: &WindowedDataset) -> Result<Vec<Tensor>>;
}

impl Forecaster for HybridModel {
    fn fit(&mut self, train: &WindowedDataset, val: &WindowedDataset, cfg: &TrainConfig) -> Result<Option<TrainLog>> {
        fit(self, train, val, cfg).map(Some)
    }

    fn predict(&self, data: &WindowedDataset) -> Result<Vec<Tensor>> {
        HybridModel::predict(self, &data.inputs, EVAL_CHUNK)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_windows: usize,
    pub val_windows: usize,
    pub test_windows: usize,
    pub report: MetricsReport,
    /// Test R² averaged over tasks.
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    pub mean: MetricsReport,
    #[serde(rename = "Average-Test-R²")]
    pub average_test_r2: f64,
}

/// Rolling-origin evaluation: the windows are cut into `folds + 1` equal
/// blocks; fold `i` trains on blocks `0..i` (its last `val_frac` share held
/// out for early stopping) and tests on block `i`.
pub fn cross_validate<F, M>(
    series: &OhlcvSeries,
    spec: &WindowSpec,
    cfg: &TrainConfig,
    method: &str,
    mut factory: F,
) -> Result<CrossValidation>
where
    F: FnMut(usize) -> Result<M>,
    M: Forecaster,
{
    cfg.validate()?;
    spec.validate()?;
    let n = crate::data::window_count(series.len(), spec.window);
    let k = cfg.folds;
    if k < 2 {
        return Err(Error::config("folds", "cross-validation needs at least two folds"));
    }
    let block = n / (k + 1);
    if block < 3 {
        return Err(Error::Contract(format!(
            "{n} windows cannot form {k} folds (each block needs at least 3 windows)"
        )));
    }
    let mut folds = Vec::with_capacity(k);
    for i in 1..=k {
        let seen = i * block;
        let val = ((seen as f64 * spec.val_frac) as usize).max(1);
        let train = seen - val;
        let test = if i == k { n - seen } else { block };
        let rows = seen + test + spec.window;
        let splits = make_windows_with_counts(&series.prefix(rows), spec, train, val, test)?;
        let mut model = factory(i)?;
        model.fit(&splits.train, &splits.val, cfg)?;
        let preds = model.predict(&splits.test)?;
        let report = evaluate_predictions(method, &splits.test, &preds, &splits.normalizer, ZeroPolicy::Error)?;
        let r_squared = report.summary().r_squared;
        folds.push(FoldResult {
            fold: i,
            train_windows: train,
            val_windows: val,
            test_windows: test,
            report,
            r_squared,
        });
    }
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.report.clone()).collect();
    let average_test_r2 = folds.iter().map(|f| f.r_squared).sum::<f64>() / k as f64;
    Ok(CrossValidation {
        mean: MetricsReport::mean(method, &reports)?,
        folds,
        average_test_r2,
    })
}
