#![allow(dead_code)]

use hybridcast::attention::MultiHeadAttention;
use hybridcast::nn::ParamSet;
use hybridcast::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Multi-head attention written as explicit loops over batch, head, query,
/// key and feature indices.
pub fn naive_attention(mha: &MultiHeadAttention, params: &ParamSet, x: &Tensor) -> Vec<f64> {
    let (b, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let dk = mha.d_k;
    let xv = |bi: usize, ti: usize, j: usize| x.data()[(bi * t + ti) * d + j];
    let w = |id, r: usize, c: usize, cols: usize| params.get(id).data()[r * cols + c];
    let mut z = vec![0.0; b * t * mha.heads * dk];
    for bi in 0..b {
        for (h, p) in mha.projections.iter().enumerate() {
            let proj = |id, ti: usize, c: usize| {
                let mut s = 0.0;
                for j in 0..d {
                    s += xv(bi, ti, j) * w(id, j, c, dk);
                }
                s
            };
            for qi in 0..t {
                let mut logits = vec![0.0; t];
                for (ki, l) in logits.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for c in 0..dk {
                        s += proj(p.query, qi, c) * proj(p.key, ki, c);
                    }
                    *l = s / (dk as f64).sqrt();
                }
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let sum: f64 = e.iter().sum();
                for c in 0..dk {
                    let mut s = 0.0;
                    for ki in 0..t {
                        s += e[ki] / sum * proj(p.value, ki, c);
                    }
                    z[(bi * t + qi) * mha.heads * dk + h * dk + c] = s;
                }
            }
        }
    }
    let hw = mha.heads * dk;
    let mut out = vec![0.0; b * t * d];
    for r in 0..b * t {
        for c in 0..d {
            let mut s = 0.0;
            for j in 0..hw {
                s += z[r * hw + j] * w(mha.output, j, c, d);
            }
            out[r * d + c] = s;
        }
    }
    out
}

/// Uniform knots over `[lo, hi]` with `degree` extra knots on each side.
pub fn extended_knots(intervals: usize, degree: usize, lo: f64, hi: f64) -> Vec<f64> {
    let h = (hi - lo) / intervals as f64;
    (0..intervals + 2 * degree + 1)
        .map(|j| lo + (j as f64 - degree as f64) * h)
        .collect()
}

/// Textbook recursive definition of the `i`-th B-spline of degree `p`.
pub fn cox_de_boor(knots: &[f64], i: usize, p: usize, t: f64) -> f64 {
    if p == 0 {
        return if knots[i] <= t && t < knots[i + 1] { 1.0 } else { 0.0 };
    }
    let left = (t - knots[i]) / (knots[i + p] - knots[i]) * cox_de_boor(knots, i, p - 1, t);
    let right = (knots[i + p + 1] - t) / (knots[i + p + 1] - knots[i + 1]) * cox_de_boor(knots, i + 1, p - 1, t);
    left + right
}

use chrono::NaiveDate;
use hybridcast::data::{write_csv, OhlcvSeries};
use hybridcast::harness::{DataConfig, RunConfig};
use hybridcast::model::{ModelConfig, Variant};
use hybridcast::training::TrainConfig;

/// Narrow widths everywhere so a full fit takes well under a second.
pub fn tiny_config(variant: Variant, tasks: &[&str]) -> RunConfig {
    RunConfig {
        model: ModelConfig {
            window: 4,
            input_channels: 4,
            d_model: 8,
            heads: 2,
            ffn_hidden: 8,
            gru_hidden: 4,
            bigru_hidden: 4,
            variant,
            tasks: tasks.iter().map(|t| t.to_string()).collect(),
            seed: 11,
            ..ModelConfig::default()
        },
        train: TrainConfig {
            max_epochs: 6,
            batch_size: 16,
            seed: 11,
            ..TrainConfig::default()
        },
        data: DataConfig::default(),
    }
}

/// Daily OHLCV rows whose close follows `close(t)`.
pub fn series_from(len: usize, close: impl Fn(usize) -> f64) -> OhlcvSeries {
    let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut columns: [Vec<f64>; 6] = Default::default();
    let mut timestamps = Vec::with_capacity(len);
    for t in 0..len {
        let c = close(t);
        let o = if t == 0 { c } else { close(t - 1) };
        let spread = 0.01 * c.abs().max(1.0);
        let volume = 1000.0 + 50.0 * ((t % 7) as f64);
        let row = [o, o.max(c) + spread, o.min(c) - spread, c, volume, volume * c];
        for (col, v) in columns.iter_mut().zip(row) {
            col.push(v);
        }
        timestamps.push(start + chrono::Duration::days(t as i64));
    }
    let s = OhlcvSeries { timestamps, columns };
    s.validate().unwrap();
    s
}

pub fn write_series(dir: &std::path::Path, name: &str, series: &OhlcvSeries) -> std::path::PathBuf {
    let p = dir.join(name);
    write_csv(series, &p).unwrap();
    p
}
