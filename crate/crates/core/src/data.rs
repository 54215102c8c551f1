//! OHLCV series loading, normalization, windowing and synthetic generators.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowIssue};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Open,
    High,
    Low,
    Close,
    Volume,
    Amount,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Open,
        Channel::High,
        Channel::Low,
        Channel::Close,
        Channel::Volume,
        Channel::Amount,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Open => "open",
            Channel::High => "high",
            Channel::Low => "low",
            Channel::Close => "close",
            Channel::Volume => "volume",
            Channel::Amount => "amount",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config("channel", format!("unknown channel `{s}`")))
    }
}

pub const CSV_HEADER: [&str; 7] = ["date", "open", "high", "low", "close", "volume", "amount"];

/// Columnar OHLCV series, sorted by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvSeries {
    pub timestamps: Vec<NaiveDateTime>,
    /// Indexed by [`Channel::index`].
    pub columns: [Vec<f64>; 6],
}

impl OhlcvSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.columns[c.index()]
    }

    /// The first `len` rows.
    pub fn prefix(&self, len: usize) -> OhlcvSeries {
        OhlcvSeries {
            timestamps: self.timestamps[..len].to_vec(),
            columns: std::array::from_fn(|i| self.columns[i][..len].to_vec()),
        }
    }

    /// Check the OHLC ordering and sign constraints on every row.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        for i in 0..self.len() {
            if let Some(reason) = row_issue(std::array::from_fn(|c| self.columns[c][i])) {
                issues.push(RowIssue { line: i + 2, reason });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation { rows: issues })
        }
    }
}

fn row_issue(v: [f64; 6]) -> Option<String> {
    let [open, high, low, close, volume, amount] = v;
    if v.iter().any(|x| !x.is_finite()) {
        return Some("non-finite value".into());
    }
    if low > open.min(close) {
        return Some(format!("low {low} above min(open, close) {}", open.min(close)));
    }
    if high < open.max(close) {
        return Some(format!("high {high} below max(open, close) {}", open.max(close)));
    }
    if volume < 0.0 || amount < 0.0 {
        return Some("negative volume or amount".into());
    }
    None
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

/// Read a `date,open,high,low,close,volume,amount` CSV file.
pub fn load_csv(path: &Path) -> Result<OhlcvSeries> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<OhlcvSeries> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("data file is empty".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header {}, found {}", CSV_HEADER.join(","), header.join(",")),
        });
    }
    let mut rows: Vec<(NaiveDateTime, [f64; 6], usize)> = Vec::new();
    let mut issues = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 7 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 7 fields, found {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
            line,
            reason: format!("malformed timestamp `{}`", &record[0]),
        })?;
        let mut v = [0.0; 6];
        for (c, slot) in v.iter_mut().enumerate() {
            let field = &record[c + 1];
            *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("malformed number `{field}` in column {}", CSV_HEADER[c + 1]),
            })?;
        }
        if let Some(reason) = row_issue(v) {
            issues.push(RowIssue { line, reason });
        }
        rows.push((ts, v, line));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("data file has a header but no rows".into()));
    }
    let mut seen: HashMap<NaiveDateTime, usize> = HashMap::new();
    for (ts, _, line) in &rows {
        if let Some(first) = seen.insert(*ts, *line) {
            issues.push(RowIssue {
                line: *line,
                reason: format!("duplicate timestamp {ts} (first seen on line {first})"),
            });
        }
    }
    if !issues.is_empty() {
        issues.sort_by_key(|r| r.line);
        return Err(Error::Validation { rows: issues });
    }
    rows.sort_by_key(|r| r.0);
    let mut series = OhlcvSeries {
        timestamps: Vec::with_capacity(rows.len()),
        columns: Default::default(),
    };
    for (ts, v, _) in rows {
        series.timestamps.push(ts);
        for (col, x) in series.columns.iter_mut().zip(v) {
            col.push(x);
        }
    }
    Ok(series)
}

pub fn write_csv(series: &OhlcvSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for i in 0..series.len() {
        let mut rec = vec![series.timestamps[i].format("%Y-%m-%d %H:%M:%S").to_string()];
        rec.extend(series.columns.iter().map(|c| format!("{}", c[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-channel min-max scaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: [f64; 6],
    pub max: [f64; 6],
}

impl Normalizer {
    /// Fit on `rows` of the series; `used` channels must not be constant there.
    pub fn fit(series: &OhlcvSeries, rows: std::ops::Range<usize>, used: &[Channel]) -> Result<Self> {
        if rows.is_empty() || rows.end > series.len() {
            return Err(Error::Contract(format!(
                "normalizer rows {rows:?} out of range for {} rows",
                series.len()
            )));
        }
        let mut min = [f64::INFINITY; 6];
        let mut max = [f64::NEG_INFINITY; 6];
        for c in 0..6 {
            for &v in &series.columns[c][rows.clone()] {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        for &c in used {
            if max[c.index()] == min[c.index()] {
                return Err(Error::Domain(format!(
                    "channel `{c}` is constant over the training rows; min-max scaling is undefined"
                )));
            }
        }
        Ok(Self { min, max })
    }

    fn range(&self, c: Channel) -> f64 {
        let r = self.max[c.index()] - self.min[c.index()];
        if r == 0.0 {
            1.0
        } else {
            r
        }
    }

    pub fn transform(&self, c: Channel, v: f64) -> f64 {
        (v - self.min[c.index()]) / self.range(c)
    }

    pub fn inverse(&self, c: Channel, v: f64) -> f64 {
        v * self.range(c) + self.min[c.index()]
    }
}

/// Which channels feed the model and which are predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub window: usize,
    pub inputs: Vec<Channel>,
    pub targets: Vec<Channel>,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window: 5,
            inputs: vec![Channel::Open, Channel::High, Channel::Low, Channel::Close],
            targets: vec![Channel::Volume, Channel::Amount],
            train_frac: 0.7,
            val_frac: 0.1,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("window", "must be positive"));
        }
        if self.inputs.is_empty() {
            return Err(Error::config("inputs", "at least one input channel is required"));
        }
        if self.targets.is_empty() {
            return Err(Error::config("targets", "at least one target channel is required"));
        }
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.train_frac) || !ok(self.val_frac) || self.train_frac + self.val_frac >= 1.0 {
            return Err(Error::config(
                "train_frac",
                format!(
                    "fractions {} / {} must be in (0, 1) and leave room for a test split",
                    self.train_frac, self.val_frac
                ),
            ));
        }
        Ok(())
    }

    pub fn used_channels(&self) -> Vec<Channel> {
        let mut v: Vec<Channel> = self.inputs.iter().chain(&self.targets).copied().collect();
        v.sort();
        v.dedup();
        v
    }

    /// `(train, val, test)` window counts for `n` windows.
    pub fn split_counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        let train = (n as f64 * self.train_frac + 1e-9).floor() as usize;
        let val = (n as f64 * self.val_frac + 1e-9).floor() as usize;
        let test = n.saturating_sub(train + val);
        check_split(n, train, val, test)?;
        Ok((train, val, test))
    }
}

fn check_split(n: usize, train: usize, val: usize, test: usize) -> Result<()> {
    if train < 2 || val < 1 || test < 2 {
        return Err(Error::EmptyInput(format!(
            "{n} windows give splits {train}/{val}/{test}; need at least 2/1/2"
        )));
    }
    Ok(())
}

/// Normalized windows and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// `[n, T, C]`
    pub inputs: Tensor,
    /// One `[n, 1]` tensor per target channel.
    pub targets: Vec<Tensor>,
    pub target_channels: Vec<Channel>,
    /// Row index (into the source series) of each window's target.
    pub target_rows: Vec<usize>,
    pub target_times: Vec<NaiveDateTime>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.target_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_rows.is_empty()
    }

    /// Gather a batch of windows by index.
    pub fn batch(&self, idx: &[usize]) -> (Tensor, Vec<Tensor>) {
        let shape = self.inputs.shape();
        let per = shape[1] * shape[2];
        let mut data = Vec::with_capacity(idx.len() * per);
        for &i in idx {
            data.extend_from_slice(&self.inputs.data()[i * per..(i + 1) * per]);
        }
        let x = Tensor::new(vec![idx.len(), shape[1], shape[2]], data).expect("batch shape");
        let ys = self
            .targets
            .iter()
            .map(|t| Tensor::new(vec![idx.len(), 1], idx.iter().map(|&i| t.data()[i]).collect()).expect("target shape"))
            .collect();
        (x, ys)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSplits {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
    pub normalizer: Normalizer,
}

/// Window `i` covers rows `i .. i+T` and predicts row `i+T`.
pub fn window_count(rows: usize, window: usize) -> usize {
    rows.saturating_sub(window)
}

/// Chronological train/val/test split with the normalizer fit on training rows only.
pub fn make_windows(series: &OhlcvSeries, spec: &WindowSpec) -> Result<WindowSplits> {
    spec.validate()?;
    let n = window_count(series.len(), spec.window);
    let (train, val, test) = spec.split_counts(n)?;
    make_windows_with_counts(series, spec, train, val, test)
}

/// Like [`make_windows`] with explicit counts, using windows `0 .. train+val+test`.
pub fn make_windows_with_counts(
    series: &OhlcvSeries,
    spec: &WindowSpec,
    train: usize,
    val: usize,
    test: usize,
) -> Result<WindowSplits> {
    spec.validate()?;
    let n = window_count(series.len(), spec.window);
    check_split(n, train, val, test)?;
    if train + val + test > n {
        return Err(Error::Contract(format!(
            "{} windows requested but the series has {n}",
            train + val + test
        )));
    }
    let normalizer = Normalizer::fit(series, 0..train + spec.window, &spec.used_channels())?;
    let build = |range: std::ops::Range<usize>| build_dataset(series, spec, &normalizer, range);
    Ok(WindowSplits {
        train: build(0..train)?,
        val: build(train..train + val)?,
        test: build(train + val..train + val + test)?,
        normalizer,
    })
}

pub fn build_dataset(
    series: &OhlcvSeries,
    spec: &WindowSpec,
    normalizer: &Normalizer,
    windows: std::ops::Range<usize>,
) -> Result<WindowedDataset> {
    let t = spec.window;
    let c = spec.inputs.len();
    let count = windows.len();
    let mut x = Vec::with_capacity(count * t * c);
    let mut ys = vec![Vec::with_capacity(count); spec.targets.len()];
    let mut rows = Vec::with_capacity(count);
    for i in windows {
        for r in i..i + t {
            for &ch in &spec.inputs {
                x.push(normalizer.transform(ch, series.channel(ch)[r]));
            }
        }
        for (y, &ch) in ys.iter_mut().zip(&spec.targets) {
            y.push(normalizer.transform(ch, series.channel(ch)[i + t]));
        }
        rows.push(i + t);
    }
    Ok(WindowedDataset {
        inputs: Tensor::new(vec![count, t, c], x)?,
        targets: ys.into_iter().map(|y| Tensor::new(vec![count, 1], y)).collect::<Result<_>>()?,
        target_channels: spec.targets.clone(),
        target_times: rows.iter().map(|&r| series.timestamps[r]).collect(),
        target_rows: rows,
    })
}

/// Normalized `[1, T, C]` window ending at the last row of the series.
pub fn latest_window(series: &OhlcvSeries, spec: &WindowSpec, normalizer: &Normalizer) -> Result<Tensor> {
    let t = spec.window;
    if series.len() < t {
        return Err(Error::EmptyInput(format!(
            "need at least {t} rows for a window, found {}",
            series.len()
        )));
    }
    let start = series.len() - t;
    let mut x = Vec::with_capacity(t * spec.inputs.len());
    for r in start..series.len() {
        for &ch in &spec.inputs {
            x.push(normalizer.transform(ch, series.channel(ch)[r]));
        }
    }
    Tensor::new(vec![1, t, spec.inputs.len()], x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    SinusoidMix,
    RegimeSwitch,
    TrendPlusNoise,
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::SinusoidMix => "sinusoid-mix",
            SynthKind::RegimeSwitch => "regime-switch",
            SynthKind::TrendPlusNoise => "trend-plus-noise",
        }
    }

    pub fn default_noise(self) -> f64 {
        match self {
            SynthKind::SinusoidMix => 0.5,
            SynthKind::RegimeSwitch => 1.0,
            SynthKind::TrendPlusNoise => 1.0,
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SynthKind::SinusoidMix, SynthKind::RegimeSwitch, SynthKind::TrendPlusNoise]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown generator `{s}`")))
    }
}

/// `(amplitude, period, phase)` of each sinusoid in the mix.
pub const SINUSOID_COMPONENTS: [(f64, f64, f64); 3] = [(10.0, 50.0, 0.0), (6.0, 20.0, 0.7), (3.0, 7.0, 1.9)];
pub const SINUSOID_LEVEL: f64 = 100.0;

/// Noise-free close price of the sinusoid mix at step `t`.
pub fn sinusoid_close(t: usize) -> f64 {
    let t = t as f64;
    SINUSOID_LEVEL
        + SINUSOID_COMPONENTS
            .iter()
            .map(|(a, p, ph)| a * (std::f64::consts::TAU * t / p + ph).sin())
            .sum::<f64>()
}

/// Per-step return volatility in the two halves of a regime-switch series.
pub const REGIME_SIGMAS: (f64, f64) = (0.004, 0.016);

pub const MIN_SYNTH_LENGTH: usize = 50;

pub fn synth_series(kind: SynthKind, length: usize, seed: u64) -> Result<OhlcvSeries> {
    synth_series_with_noise(kind, length, seed, kind.default_noise())
}

/// `noise` scales every random term; `0.0` gives a deterministic series.
pub fn synth_series_with_noise(kind: SynthKind, length: usize, seed: u64, noise: f64) -> Result<OhlcvSeries> {
    if length < MIN_SYNTH_LENGTH {
        return Err(Error::Contract(format!(
            "synthetic series need at least {MIN_SYNTH_LENGTH} rows, got {length}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Contract(format!("noise scale {noise} must be finite and non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
    let close: Vec<f64> = match kind {
        SynthKind::SinusoidMix => (0..length).map(|t| sinusoid_close(t) + noise * gauss()).collect(),
        SynthKind::TrendPlusNoise => (0..length)
            .map(|t| 50.0 + 0.05 * t as f64 + 2.0 * noise * gauss())
            .collect(),
        SynthKind::RegimeSwitch => {
            let mut log_p = 100f64.ln();
            (0..length)
                .map(|t| {
                    let sigma = if t < length / 2 { REGIME_SIGMAS.0 } else { REGIME_SIGMAS.1 };
                    if t > 0 {
                        log_p += sigma * noise * gauss();
                    }
                    log_p.exp()
                })
                .collect()
        }
    };
    let start = NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let mut series = OhlcvSeries {
        timestamps: (0..length).map(|t| start + chrono::Duration::days(t as i64)).collect(),
        columns: Default::default(),
    };
    let mut spread_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5a1e);
    for t in 0..length {
        let c = close[t];
        let o = if t == 0 { c } else { close[t - 1] };
        let jitter = |r: &mut ChaCha8Rng| 0.05 + 0.1 * noise * r.random::<f64>();
        let h = o.max(c) + jitter(&mut spread_rng);
        let l = o.min(c) - jitter(&mut spread_rng);
        let ret = if t == 0 { 0.0 } else { (c / close[t - 1] - 1.0).abs() };
        let v = 10_000.0 * (1.0 + 25.0 * ret) * (1.0 + 0.1 * noise * spread_rng.random::<f64>());
        let amount = v * (o + h + l + c) / 4.0;
        for (col, x) in series.columns.iter_mut().zip([o, h, l, c, v, amount]) {
            col.push(x);
        }
    }
    Ok(series)
}
