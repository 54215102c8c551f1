//! Operations behind the command line: configuration loading, run manifests
//! and the train / evaluate / ablate / predict / bench / synth commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{Checkpoint, FORMAT_VERSION};
use crate::data::{
    build_dataset, latest_window, load_csv, make_windows, synth_series, synth_series_with_noise, window_count,
    write_csv, Channel, OhlcvSeries, SynthKind, WindowSpec, WindowedDataset,
};
use crate::error::{Error, Result};
use crate::metrics::{table_csv, MetricsReport, SummaryRow, ZeroPolicy};
use crate::model::{HybridModel, Variant};
use crate::nn::Mode;
use crate::tensor::Tensor;
use crate::training::{cross_validate, evaluate_predictions, fit, TrainConfig, TrainLog, EVAL_CHUNK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub inputs: Vec<Channel>,
    pub train_frac: f64,
    pub val_frac: f64,
    pub zero_policy: ZeroPolicy,
}

impl Default for DataConfig {
    fn default() -> Self {
        let spec = WindowSpec::default();
        Self {
            inputs: spec.inputs,
            train_frac: spec.train_frac,
            val_frac: spec.val_frac,
            zero_policy: ZeroPolicy::default(),
        }
    }
}

/// Everything a run needs, loadable from TOML with `[model]`, `[train]` and `[data]` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: crate::model::ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.data.inputs.len() != self.model.input_channels {
            return Err(Error::config(
                "model.input_channels",
                format!(
                    "{} does not match the {} channels listed in data.inputs",
                    self.model.input_channels,
                    self.data.inputs.len()
                ),
            ));
        }
        self.window_spec()?.validate()?;
        self.train.normalized_weights(self.model.tasks.len())?;
        Ok(())
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        let targets = self
            .model
            .tasks
            .iter()
            .map(|t| {
                t.parse::<Channel>()
                    .map_err(|_| Error::config("model.tasks", format!("`{t}` is not a data channel")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WindowSpec {
            window: self.model.window,
            inputs: self.data.inputs.clone(),
            targets,
            train_frac: self.data.train_frac,
            val_frac: self.data.val_frac,
        })
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply a `dotted.key=value` override to a TOML table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

/// Load an optional TOML file, apply overrides, and validate.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => {
            if !p.exists() {
                return Err(Error::NotFound(p.to_path_buf()));
            }
            let text = std::fs::read_to_string(p)?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::config("config", e.message().to_string()))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub version: String,
    pub checkpoint_format: u32,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timing_seconds: BTreeMap<String, f64>,
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    fn write(&self, out: &Path) -> Result<()> {
        std::fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(out: &Path) -> Result<Self> {
        let p = out.join(MANIFEST_FILE);
        if !p.exists() {
            return Err(Error::NotFound(p));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?)
    }
}

/// Output directory plus the manifest that describes it.
pub struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(out: &Path, command: &str, config: serde_json::Value, seed: Option<u64>, inputs: &[&Path]) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        let mut hashes = BTreeMap::new();
        for p in inputs {
            hashes.insert(p.display().to_string(), sha256_file(p)?);
        }
        let run = Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                status: RunStatus::Incomplete,
                version: env!("CARGO_PKG_VERSION").to_string(),
                checkpoint_format: FORMAT_VERSION,
                seed,
                config,
                inputs: hashes,
                outputs: Vec::new(),
                timing_seconds: BTreeMap::new(),
                error: None,
            },
        };
        run.manifest.write(out)?;
        Ok(run)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn time(&mut self, name: &str, seconds: f64) {
        self.manifest.timing_seconds.insert(name.to_string(), seconds);
    }

    fn finish<T>(mut self, result: Result<T>) -> Result<T> {
        match &result {
            Ok(_) => self.manifest.status = RunStatus::Complete,
            Err(e) => {
                self.manifest.status = RunStatus::Failed;
                self.manifest.error = Some(e.to_string());
            }
        }
        self.manifest.write(&self.out)?;
        result
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_predictions(
    path: &Path,
    label: Option<&str>,
    data: &WindowedDataset,
    preds: &[Tensor],
    normalizer: &crate::data::Normalizer,
    append: bool,
) -> Result<()> {
    let file = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if !append {
        let mut header = vec!["date", "task", "actual", "predicted"];
        if label.is_some() {
            header.insert(0, "method");
        }
        w.write_record(&header)?;
    }
    for (k, (p, t)) in preds.iter().zip(&data.targets).enumerate() {
        let ch = data.target_channels[k];
        for i in 0..data.len() {
            let mut rec = vec![
                data.target_times[i].format("%Y-%m-%d %H:%M:%S").to_string(),
                ch.to_string(),
                format!("{}", normalizer.inverse(ch, t.data()[i])),
                format!("{}", normalizer.inverse(ch, p.data()[i])),
            ];
            if let Some(l) = label {
                rec.insert(0, l.to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub struct TrainOutcome {
    pub metrics: MetricsReport,
    pub log: TrainLog,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Fit on the train split, early-stop on val, report test metrics.
pub fn cmd_train(cfg: &RunConfig, data_path: &Path, out: &Path) -> Result<TrainOutcome> {
    let mut run = Run::start(out, "train", serde_json::to_value(cfg)?, Some(cfg.train.seed), &[data_path])?;
    let result = (|| {
        cfg.validate()?;
        let series = load_csv(data_path)?;
        let spec = cfg.window_spec()?;
        let splits = make_windows(&series, &spec)?;
        let mut model = HybridModel::build(cfg.model.clone())?;
        write_json(&run.path("audit.json"), &model.parameter_audit())?;
        let start = Instant::now();
        let log = fit(&mut model, &splits.train, &splits.val, &cfg.train)?;
        run.time("fit", start.elapsed().as_secs_f64());
        write_json(&run.path("train_log.json"), &log)?;
        let preds = model.predict(&splits.test.inputs, EVAL_CHUNK)?;
        let metrics = evaluate_predictions(
            cfg.model.variant.method_label(),
            &splits.test,
            &preds,
            &splits.normalizer,
            cfg.data.zero_policy,
        )?;
        write_json(&run.path("metrics.json"), &metrics)?;
        write_predictions(&run.path("test_predictions.csv"), None, &splits.test, &preds, &splits.normalizer, false)?;
        let ck = Checkpoint {
            model,
            data: Some(spec),
            normalizer: Some(splits.normalizer),
        };
        ck.save(&run.path(CHECKPOINT_FILE))?;
        Ok(TrainOutcome { metrics, log })
    })();
    run.finish(result)
}

fn checkpoint_parts(ck: &Checkpoint) -> Result<(&WindowSpec, &crate::data::Normalizer)> {
    match (&ck.data, &ck.normalizer) {
        (Some(d), Some(n)) => Ok((d, n)),
        _ => Err(Error::Checkpoint("checkpoint has no data spec or normalizer".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub report: MetricsReport,
    pub summary: SummaryRow,
    pub test_windows: usize,
    pub inference_seconds: f64,
}

/// Score a checkpoint on the test split of `data_path`, using the stored normalizer.
pub fn cmd_evaluate(checkpoint: &Path, data_path: &Path, out: &Path) -> Result<EvaluationReport> {
    let mut run = Run::start(out, "evaluate", serde_json::Value::Null, None, &[checkpoint, data_path])?;
    let result = (|| {
        let ck = Checkpoint::load(checkpoint)?;
        let (spec, normalizer) = checkpoint_parts(&ck)?;
        let series = load_csv(data_path)?;
        let n = window_count(series.len(), spec.window);
        let (train, val, test) = spec.split_counts(n)?;
        let data = build_dataset(&series, spec, normalizer, train + val..train + val + test)?;
        let start = Instant::now();
        let preds = ck.model.predict(&data.inputs, EVAL_CHUNK)?;
        let inference_seconds = start.elapsed().as_secs_f64();
        run.time("inference", inference_seconds);
        let report = evaluate_predictions(
            ck.model.config().variant.method_label(),
            &data,
            &preds,
            normalizer,
            ZeroPolicy::Error,
        )?;
        let summary = report.summary();
        std::fs::write(run.path("metrics.csv"), table_csv(std::slice::from_ref(&summary))?)?;
        write_predictions(&run.path("predictions.csv"), None, &data, &preds, normalizer, false)?;
        let eval = EvaluationReport {
            report,
            summary,
            test_windows: data.len(),
            inference_seconds,
        };
        write_json(&run.path("evaluation.json"), &eval)?;
        Ok(eval)
    })();
    run.finish(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub variant: Variant,
    pub report: MetricsReport,
    pub summary: SummaryRow,
    #[serde(rename = "Average-Test-R²", skip_serializing_if = "Option::is_none")]
    pub average_test_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub complete: bool,
    pub failed_variant: Option<Variant>,
    pub error: Option<String>,
    pub entries: Vec<AblationEntry>,
}

/// Train and score each variant under identical data and settings. With
/// `cross_validated`, every row is the mean over rolling-origin folds.
pub fn cmd_ablate(
    cfg: &RunConfig,
    data_path: &Path,
    variants: &[Variant],
    cross_validated: bool,
    out: &Path,
) -> Result<AblationReport> {
    let mut run = Run::start(out, "ablate", serde_json::to_value(cfg)?, Some(cfg.train.seed), &[data_path])?;
    let result = (|| {
        cfg.validate()?;
        if variants.len() < 2 {
            return Err(Error::config("variants", "an ablation needs at least two variants"));
        }
        let series = load_csv(data_path)?;
        let spec = cfg.window_spec()?;
        let table = run.path("ablation.csv");
        let json = run.path("ablation.json");
        let plot = run.path("ablation_predictions.csv");
        let mut report = AblationReport {
            complete: false,
            failed_variant: None,
            error: None,
            entries: Vec::new(),
        };
        for (i, &variant) in variants.iter().enumerate() {
            let model_cfg = crate::model::ModelConfig {
                variant,
                ..cfg.model.clone()
            };
            let start = Instant::now();
            let entry = ablate_one(&series, &spec, cfg, model_cfg, cross_validated, &plot, i > 0);
            run.time(variant.as_str(), start.elapsed().as_secs_f64());
            match entry {
                Ok(e) => report.entries.push(e),
                Err(e) => {
                    report.failed_variant = Some(variant);
                    report.error = Some(e.to_string());
                    write_ablation(&report, &table, &json)?;
                    return Err(e);
                }
            }
            write_ablation(&report, &table, &json)?;
        }
        report.complete = true;
        write_ablation(&report, &table, &json)?;
        Ok(report)
    })();
    run.finish(result)
}

fn write_ablation(report: &AblationReport, table: &Path, json: &Path) -> Result<()> {
    let rows: Vec<SummaryRow> = report.entries.iter().map(|e| e.summary.clone()).collect();
    std::fs::write(table, table_csv(&rows)?)?;
    write_json(json, report)
}

fn ablate_one(
    series: &OhlcvSeries,
    spec: &WindowSpec,
    cfg: &RunConfig,
    model_cfg: crate::model::ModelConfig,
    cross_validated: bool,
    plot: &Path,
    append: bool,
) -> Result<AblationEntry> {
    let variant = model_cfg.variant;
    let label = variant.method_label();
    if cross_validated {
        let cv = cross_validate(series, spec, &cfg.train, label, |_| HybridModel::build(model_cfg.clone()))?;
        let summary = cv.mean.summary();
        return Ok(AblationEntry {
            variant,
            report: cv.mean,
            summary,
            average_test_r2: Some(cv.average_test_r2),
        });
    }
    let splits = make_windows(series, spec)?;
    let mut model = HybridModel::build(model_cfg)?;
    fit(&mut model, &splits.train, &splits.val, &cfg.train)?;
    let preds = model.predict(&splits.test.inputs, EVAL_CHUNK)?;
    write_predictions(plot, Some(label), &splits.test, &preds, &splits.normalizer, append)?;
    let report = evaluate_predictions(label, &splits.test, &preds, &splits.normalizer, cfg.data.zero_policy)?;
    Ok(AblationEntry {
        variant,
        summary: report.summary(),
        report,
        average_test_r2: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub step: usize,
    pub task: String,
    pub value: f64,
}

/// Iterated multi-step forecast from the last window of the series.
///
/// Each step's predictions replace their channels in the next window row;
/// input channels that are not predicted repeat their last observed value.
pub fn rollout(ck: &Checkpoint, series: &OhlcvSeries, horizon: usize) -> Result<Vec<Forecast>> {
    let (spec, normalizer) = checkpoint_parts(ck)?;
    if horizon == 0 || horizon > spec.window {
        return Err(Error::Contract(format!(
            "horizon {horizon} outside the supported range 1..={}",
            spec.window
        )));
    }
    let mut window = latest_window(series, spec, normalizer)?;
    let c = spec.inputs.len();
    let mut out = Vec::with_capacity(horizon * spec.targets.len());
    for step in 1..=horizon {
        let preds = ck.model.forward(&window, Mode::INFER, 0)?;
        let values: Vec<f64> = preds.iter().map(|p| p.data()[0]).collect();
        for (&ch, &v) in spec.targets.iter().zip(&values) {
            out.push(Forecast {
                step,
                task: ch.to_string(),
                value: normalizer.inverse(ch, v),
            });
        }
        let data = window.data();
        let last = &data[data.len() - c..];
        let next: Vec<f64> = spec
            .inputs
            .iter()
            .zip(last)
            .map(|(ch, &prev)| spec.targets.iter().position(|t| t == ch).map_or(prev, |k| values[k]))
            .collect();
        let mut shifted = data[c..].to_vec();
        shifted.extend(next);
        window = Tensor::new(vec![1, spec.window, c], shifted)?;
    }
    Ok(out)
}

pub fn cmd_predict(checkpoint: &Path, data_path: &Path, horizon: usize, out: &Path) -> Result<Vec<Forecast>> {
    let mut run = Run::start(out, "predict", serde_json::json!({ "horizon": horizon }), None, &[checkpoint, data_path])?;
    let result = (|| {
        let ck = Checkpoint::load(checkpoint)?;
        let series = load_csv(data_path)?;
        let forecasts = rollout(&ck, &series, horizon)?;
        let mut w = csv::Writer::from_path(run.path("forecast.csv"))?;
        for f in &forecasts {
            w.serialize(f)?;
        }
        w.flush()?;
        Ok(forecasts)
    })();
    run.finish(result)
}

pub const BENCH_WARMUP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub batch_size: usize,
    pub warmup: usize,
    pub repetitions: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub trainable_parameters: usize,
    pub method: String,
}

/// Single-window inference latency after a fixed warm-up.
pub fn bench_model(model: &HybridModel, window: &Tensor, repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::Contract("benchmark needs at least one repetition".into()));
    }
    for _ in 0..BENCH_WARMUP {
        model.forward(window, Mode::INFER, 0)?;
    }
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        std::hint::black_box(model.forward(window, Mode::INFER, 0)?);
        times.push(start.elapsed().as_secs_f64());
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    Ok(BenchReport {
        batch_size: window.shape()[0],
        warmup: BENCH_WARMUP,
        repetitions,
        mean_seconds: mean,
        std_seconds: var.sqrt(),
        trainable_parameters: model.params().trainable_count(),
        method: "wall-clock per forward pass, single thread, inference mode".to_string(),
    })
}

pub fn cmd_bench(checkpoint: &Path, data_path: Option<&Path>, repetitions: usize, out: &Path) -> Result<BenchReport> {
    let mut inputs = vec![checkpoint];
    inputs.extend(data_path);
    let mut run = Run::start(out, "bench", serde_json::json!({ "repetitions": repetitions }), None, &inputs)?;
    let result = (|| {
        let ck = Checkpoint::load(checkpoint)?;
        let cfg = ck.model.config();
        let window = match (data_path, checkpoint_parts(&ck)) {
            (Some(p), Ok((spec, normalizer))) => latest_window(&load_csv(p)?, spec, normalizer)?,
            _ => Tensor::zeros(&[1, cfg.window, cfg.input_channels]),
        };
        let report = bench_model(&ck.model, &window, repetitions)?;
        write_json(&run.path("bench.json"), &report)?;
        Ok(report)
    })();
    run.finish(result)
}

pub fn cmd_synth(kind: SynthKind, length: usize, seed: u64, noise: Option<f64>, out: &Path) -> Result<PathBuf> {
    let cfg = serde_json::json!({ "kind": kind, "length": length, "noise": noise });
    let mut run = Run::start(out, "synth", cfg, Some(seed), &[])?;
    let result = (|| {
        let series = match noise {
            Some(n) => synth_series_with_noise(kind, length, seed, n)?,
            None => synth_series(kind, length, seed)?,
        };
        let path = run.path(&format!("{}.csv", kind.as_str()));
        write_csv(&series, &path)?;
        Ok(path)
    })();
    run.finish(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let cfg = load_config(
            None,
            &[
                "model.d_model=16".into(),
                "train.learning_rate=0.01".into(),
                "model.variant=bigru-only".into(),
                "model.tasks=[\"close\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model.d_model, 16);
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.model.variant, Variant::BigruOnly);
        assert_eq!(cfg.window_spec().unwrap().targets, vec![Channel::Close]);
    }

    #[test]
    fn invalid_config_names_field() {
        match load_config(None, &["model.heads=3".into()]) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "heads"),
            other => panic!("unexpected {other:?}"),
        }
        match load_config(None, &["model.input_channels=2".into()]) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "model.input_channels"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_config(None, &["model.bogus=1".into()]), Err(Error::Config { .. })));
        assert!(matches!(load_config(None, &["model.tasks=[\"rsi\"]".into()]), Err(Error::Config { .. })));
        assert!(matches!(
            load_config(Some(Path::new("/nonexistent.toml")), &[]),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn config_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(
            &p,
            "[model]\nd_model = 8\nheads = 2\n\n[model.kan]\nintervals = 4\n\n[train]\nmax_epochs = 3\n",
        )
        .unwrap();
        let cfg = load_config(Some(&p), &["train.patience=1".into()]).unwrap();
        assert_eq!(cfg.model.kan.intervals, 4);
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!(cfg.train.patience, 1);
    }

    #[test]
    fn bench_rejects_zero_repetitions() {
        let m = HybridModel::build(crate::model::ModelConfig {
            d_model: 8,
            heads: 2,
            gru_hidden: 4,
            bigru_hidden: 4,
            ..Default::default()
        })
        .unwrap();
        let w = Tensor::zeros(&[1, 5, 4]);
        assert!(matches!(bench_model(&m, &w, 0), Err(Error::Contract(_))));
        let r = bench_model(&m, &w, 3).unwrap();
        assert_eq!(r.batch_size, 1);
        assert!(r.mean_seconds > 0.0);
    }
}
