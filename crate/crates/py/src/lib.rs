//! Python bindings: build and run models, generate data, train from files,
//! and compute metrics.

use std::path::Path;

use hybridcast::checkpoint::Checkpoint;
use hybridcast::data::{synth_series, synth_series_with_noise, write_csv, Channel, SynthKind};
use hybridcast::harness;
use hybridcast::kan::SplineGrid;
use hybridcast::metrics::{self, ZeroPolicy};
use hybridcast::model::{HybridModel, ModelConfig};
use hybridcast::nn::Mode;
use hybridcast::{Error, ErrorCategory, Tensor};
use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match (&e, e.category()) {
        (Error::NotFound(_), _) => PyFileNotFoundError::new_err(e.to_string()),
        (_, ErrorCategory::Usage | ErrorCategory::Data) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned + Default>(py: Python<'_>, value: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let Some(d) = value else {
        return Ok(T::default());
    };
    let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("invalid configuration: {e}")))
}

/// A forecaster built from a configuration dictionary.
#[pyclass(name = "Model")]
struct PyModel {
    inner: HybridModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg: ModelConfig = from_py(py, config)?;
        Ok(Self {
            inner: HybridModel::build(cfg).map_err(err)?,
        })
    }

    /// The single-channel configuration of the reference layer table.
    #[staticmethod]
    fn reference() -> PyResult<Self> {
        Ok(Self {
            inner: HybridModel::build(ModelConfig::reference()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Checkpoint::load(Path::new(path)).map_err(err)?.model,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        Checkpoint {
            model: self.inner.clone(),
            data: None,
            normalizer: None,
        }
        .save(Path::new(path))
        .map_err(err)
    }

    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.config())
    }

    fn trainable_parameters(&self) -> usize {
        self.inner.params().trainable_count()
    }

    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.parameter_audit())
    }

    fn stage_shapes(&self) -> Vec<(String, String)> {
        self.inner
            .stage_trace()
            .iter()
            .map(|s| (s.stage.clone(), s.display_shape()))
            .collect()
    }

    /// Inference on a `[batch][T][C]` nested list; returns one list per task.
    fn predict(&self, inputs: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        let b = inputs.len();
        let t = inputs.first().map_or(0, Vec::len);
        let c = inputs.first().and_then(|w| w.first()).map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(b * t * c);
        for w in &inputs {
            if w.len() != t || w.iter().any(|r| r.len() != c) {
                return Err(PyValueError::new_err("inputs must be a rectangular [batch][T][C] list"));
            }
            for r in w {
                flat.extend_from_slice(r);
            }
        }
        let x = Tensor::new(vec![b, t, c], flat).map_err(err)?;
        let outs = self.inner.forward(&x, Mode::INFER, 0).map_err(err)?;
        Ok(outs.into_iter().map(Tensor::into_data).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(variant={}, tasks={:?}, trainable_parameters={})",
            self.inner.config().variant,
            self.inner.tasks(),
            self.inner.params().trainable_count()
        )
    }
}

/// Generate a synthetic OHLCV series; optionally write it as CSV.
#[pyfunction]
#[pyo3(signature = (kind, length, seed=42, noise=None, path=None))]
fn synth<'py>(
    py: Python<'py>,
    kind: &str,
    length: usize,
    seed: u64,
    noise: Option<f64>,
    path: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: SynthKind = kind.parse().map_err(err)?;
    let series = match noise {
        Some(n) => synth_series_with_noise(kind, length, seed, n),
        None => synth_series(kind, length, seed),
    }
    .map_err(err)?;
    if let Some(p) = path {
        write_csv(&series, Path::new(p)).map_err(err)?;
    }
    let d = PyDict::new(py);
    d.set_item(
        "date",
        series
            .timestamps
            .iter()
            .map(|t| t.format("%Y-%m-%d %H:%M:%S").to_string())
            .collect::<Vec<_>>(),
    )?;
    for c in Channel::ALL {
        d.set_item(c.as_str(), series.channel(c).to_vec())?;
    }
    Ok(d)
}

/// Train from a CSV file into `out`; returns the test metrics.
#[pyfunction]
#[pyo3(signature = (data, out, config=None, overrides=Vec::new()))]
fn train<'py>(
    py: Python<'py>,
    data: &str,
    out: &str,
    config: Option<&str>,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = harness::load_config(config.map(Path::new), &overrides).map_err(err)?;
    let outcome = py
        .detach(|| harness::cmd_train(&cfg, Path::new(data), Path::new(out)))
        .map_err(err)?;
    to_py(py, &outcome.metrics)
}

/// Iterated forecast from the end of `data` using a trained checkpoint.
#[pyfunction]
#[pyo3(signature = (checkpoint, data, horizon=1))]
fn forecast<'py>(py: Python<'py>, checkpoint: &str, data: &str, horizon: usize) -> PyResult<Bound<'py, PyAny>> {
    let ck = Checkpoint::load(Path::new(checkpoint)).map_err(err)?;
    let series = hybridcast::data::load_csv(Path::new(data)).map_err(err)?;
    to_py(py, &harness::rollout(&ck, &series, horizon).map_err(err)?)
}

#[pyfunction]
fn mae(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&actual, &predicted).map_err(err)
}

#[pyfunction]
fn rmse(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&actual, &predicted).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (actual, predicted, exclude_zeros=false))]
fn mape(actual: Vec<f64>, predicted: Vec<f64>, exclude_zeros: bool) -> PyResult<f64> {
    let policy = if exclude_zeros {
        ZeroPolicy::Exclude
    } else {
        ZeroPolicy::Error
    };
    Ok(metrics::mape(&actual, &predicted, policy).map_err(err)?.value)
}

#[pyfunction]
fn r_squared(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::r_squared(&actual, &predicted).map_err(err)
}

/// B-spline basis values at `t` on a uniform grid.
#[pyfunction]
#[pyo3(signature = (t, intervals=5, degree=3, lo=-2.0, hi=2.0))]
fn bspline_basis(t: f64, intervals: usize, degree: usize, lo: f64, hi: f64) -> PyResult<Vec<f64>> {
    Ok(SplineGrid::uniform(intervals, degree, lo, hi).map_err(err)?.basis(t))
}

#[pymodule]
fn hybridcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(forecast, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(bspline_basis, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
