//! Assembly of the full pipeline and its ablation variants.
//!
//! Stage order for the full variant:
//!
//! ```text
//! input [B, T, C]
//!   -> Dense(C -> d_model)            input projection
//!   -> encoder layer(s)               [B, T, d_model]
//!   -> KAN (d_model -> d_model)       per time step
//!   -> Dense(d_model -> 1)            recurrent input projection
//!   -> GRU(1 -> gru_hidden)
//!   -> BiGRU(gru_hidden -> 2·bigru_hidden)
//!   -> BatchNorm -> Dropout -> temporal attention -> BatchNorm -> Dropout
//!   -> Flatten -> Dropout -> one Dense(T·width -> 1) head per task
//! ```
//!
//! Variants drop whole blocks. The input projection exists whenever the first
//! block is the encoder or the KAN; the recurrent input projection exists
//! whenever the recurrent block follows one of them.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::EncoderLayer;
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::kan::{KanNetwork, KanSpec};
use crate::nn::{
    BatchNorm, DenseLayer, DropoutLayer, Mode, ParamSet, RunningUpdate, Scope, StageShape,
    TemporalAttention, DEFAULT_DROPOUT,
};
use crate::recurrent::{lstm_param_count, BiGru, GruCell};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    KanOnly,
    TransformerOnly,
    BigruOnly,
    KanTransformer,
    TransformerBigru,
    KanBigru,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::KanOnly,
        Variant::TransformerOnly,
        Variant::BigruOnly,
        Variant::KanTransformer,
        Variant::TransformerBigru,
        Variant::KanBigru,
    ];

    pub fn has_encoder(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::TransformerOnly | Variant::KanTransformer | Variant::TransformerBigru
        )
    }

    pub fn has_kan(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::KanOnly | Variant::KanTransformer | Variant::KanBigru
        )
    }

    pub fn has_recurrent(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::BigruOnly | Variant::TransformerBigru | Variant::KanBigru
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::KanOnly => "kan-only",
            Variant::TransformerOnly => "transformer-only",
            Variant::BigruOnly => "bigru-only",
            Variant::KanTransformer => "kan-transformer",
            Variant::TransformerBigru => "transformer-bigru",
            Variant::KanBigru => "kan-bigru",
        }
    }

    /// Row label used in comparison tables.
    pub fn method_label(self) -> &'static str {
        match self {
            Variant::Full => "Proposed method",
            Variant::KanOnly => "KAN",
            Variant::TransformerOnly => "Transformer",
            Variant::BigruOnly => "BiGRU",
            Variant::KanTransformer => "KAN-Transformer",
            Variant::TransformerBigru => "Transformer-BiGRU",
            Variant::KanBigru => "KAN-BiGRU",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::config("variant", format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KanConfig {
    pub intervals: usize,
    pub degree: usize,
    pub range: [f64; 2],
    pub base_term: bool,
    /// Hidden widths between the KAN input and output (empty: a single layer).
    pub hidden: Vec<usize>,
}

impl Default for KanConfig {
    fn default() -> Self {
        let spec = KanSpec::default();
        Self {
            intervals: spec.intervals,
            degree: spec.degree,
            range: [spec.range.0, spec.range.1],
            base_term: spec.base_term,
            hidden: Vec::new(),
        }
    }
}

impl KanConfig {
    pub fn spec(&self) -> KanSpec {
        KanSpec {
            intervals: self.intervals,
            degree: self.degree,
            range: (self.range[0], self.range[1]),
            base_term: self.base_term,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Input window length `T`.
    pub window: usize,
    pub input_channels: usize,
    pub d_model: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub ffn_hidden: usize,
    pub kan: KanConfig,
    pub gru_hidden: usize,
    pub bigru_hidden: usize,
    pub dropout: f64,
    pub variant: Variant,
    pub tasks: Vec<String>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 5,
            input_channels: 4,
            d_model: 32,
            heads: 4,
            encoder_layers: 1,
            ffn_hidden: 128,
            kan: KanConfig::default(),
            gru_hidden: 32,
            bigru_hidden: 128,
            dropout: DEFAULT_DROPOUT,
            variant: Variant::Full,
            tasks: vec!["volume".into(), "amount".into()],
            seed: 42,
        }
    }
}

impl ModelConfig {
    /// The layer table's configuration: one input channel, window 5.
    pub fn reference() -> Self {
        Self {
            input_channels: 1,
            ..Self::default()
        }
    }

    pub fn is_reference_shape(&self) -> bool {
        self.window == 5
            && self.input_channels == 1
            && self.d_model == 32
            && self.heads == 4
            && self.encoder_layers == 1
            && self.gru_hidden == 32
            && self.bigru_hidden == 128
            && self.variant == Variant::Full
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("input_channels", self.input_channels),
            ("d_model", self.d_model),
            ("heads", self.heads),
            ("ffn_hidden", self.ffn_hidden),
            ("gru_hidden", self.gru_hidden),
            ("bigru_hidden", self.bigru_hidden),
            ("kan.intervals", self.kan.intervals),
            ("kan.degree", self.kan.degree),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::config(
                "heads",
                format!("d_model {} is not divisible by {} heads", self.d_model, self.heads),
            ));
        }
        if self.variant.has_encoder() && self.encoder_layers == 0 {
            return Err(Error::config("encoder_layers", "variant needs at least one encoder layer"));
        }
        if self.kan.hidden.contains(&0) {
            return Err(Error::config("kan.hidden", "widths must be positive"));
        }
        if self.kan.degree > 10 {
            return Err(Error::config("kan.degree", "degree above 10 is not supported"));
        }
        if !(self.kan.range[0] < self.kan.range[1]) {
            return Err(Error::config("kan.range", "lower bound must be below upper bound"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout", format!("rate {} not in [0, 1)", self.dropout)));
        }
        if self.tasks.is_empty() {
            return Err(Error::config("tasks", "at least one task is required"));
        }
        let mut names = self.tasks.clone();
        names.sort();
        names.dedup();
        if names.len() != self.tasks.len() {
            return Err(Error::config("tasks", "task names must be unique"));
        }
        Ok(())
    }
}

/// Block that can contribute to an audit row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StageKind {
    Input,
    InputProjection,
    Transformer,
    Kan,
    RecurrentProjection,
    Gru,
    Bidirectional,
    BatchNorm,
    Dropout,
    Permute,
    AttentionDense,
    Multiply,
    Flatten,
    Head,
}

impl StageKind {
    fn label(self) -> &'static str {
        match self {
            StageKind::Input => "Input Layer",
            StageKind::InputProjection => "Input projection (Dense)",
            StageKind::Transformer => "Transformer",
            StageKind::Kan => "KAN",
            StageKind::RecurrentProjection => "Recurrent input projection (Dense)",
            StageKind::Gru => "GRU",
            StageKind::Bidirectional => "Bidirectional",
            StageKind::BatchNorm => "Batch Normalization",
            StageKind::Dropout => "Dropout",
            StageKind::Permute => "Permute",
            StageKind::AttentionDense | StageKind::Head => "Dense",
            StageKind::Multiply => "Multiply",
            StageKind::Flatten => "Flatten",
        }
    }

    /// Parameter count and output shape listed in the reference layer table.
    fn reference(self) -> Option<(usize, &'static str)> {
        Some(match self {
            StageKind::Input => (0, "(None, 5, 1)"),
            StageKind::Transformer => (4, "(None, 5, 32)"),
            StageKind::Kan => (2, "(None, 5, 25, 50)"),
            StageKind::Gru => (3360, "(None, 5, 32)"),
            StageKind::Bidirectional => (164_864, "(None, 5, 256)"),
            StageKind::BatchNorm => (1024, "(None, 5, 256)"),
            StageKind::Dropout => (0, ""),
            StageKind::Permute => (0, ""),
            StageKind::AttentionDense => (30, "(None, 256, 5)"),
            StageKind::Multiply => (0, "(None, 5, 256)"),
            StageKind::Flatten => (0, "(None, 1280)"),
            StageKind::Head => (1281, "(None, 1)"),
            StageKind::InputProjection | StageKind::RecurrentProjection => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditStatus {
    Match,
    TableInconsistent,
    NotInTable,
    NotReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub stage: String,
    pub output_shape: String,
    pub params: usize,
    pub table_params: Option<usize>,
    pub status: AuditStatus,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct HybridModel {
    config: ModelConfig,
    params: ParamSet,
    input_projection: Option<DenseLayer>,
    encoders: Vec<EncoderLayer>,
    kan: Option<KanNetwork>,
    recurrent_projection: Option<DenseLayer>,
    gru: Option<GruCell>,
    bigru: Option<BiGru>,
    norm1: BatchNorm,
    attention: TemporalAttention,
    norm2: BatchNorm,
    dropout: DropoutLayer,
    heads: Vec<DenseLayer>,
    trace: Vec<StageShape>,
}

fn in_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Dimension { op, detail } => Error::Dimension {
            op: format!("{stage}/{op}"),
            detail,
        },
        other => other,
    }
}

impl HybridModel {
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let v = config.variant;
        let mut width = config.input_channels;

        let input_projection = (v.has_encoder() || v.has_kan()).then(|| {
            let d = DenseLayer::new(&mut params, "input_projection", width, config.d_model, &mut rng);
            width = config.d_model;
            d
        });
        let mut encoders = Vec::new();
        if v.has_encoder() {
            for i in 0..config.encoder_layers {
                encoders.push(EncoderLayer::new(
                    &mut params,
                    &format!("encoder.{i}"),
                    config.d_model,
                    config.heads,
                    config.ffn_hidden,
                    &mut rng,
                )?);
            }
        }
        let kan = if v.has_kan() {
            let mut widths = vec![width];
            widths.extend(&config.kan.hidden);
            widths.push(config.d_model);
            let net = KanNetwork::new(&mut params, "kan", &widths, &config.kan.spec(), &mut rng)?;
            width = config.d_model;
            Some(net)
        } else {
            None
        };
        let (recurrent_projection, gru, bigru) = if v.has_recurrent() {
            let proj = (v.has_encoder() || v.has_kan()).then(|| {
                let d = DenseLayer::new(&mut params, "recurrent_projection", width, 1, &mut rng);
                width = 1;
                d
            });
            let gru = GruCell::new(&mut params, "gru", width, config.gru_hidden, &mut rng);
            let bigru = BiGru::new(&mut params, "bigru", config.gru_hidden, config.bigru_hidden, &mut rng);
            width = bigru.output_width();
            (proj, Some(gru), Some(bigru))
        } else {
            (None, None, None)
        };
        let norm1 = BatchNorm::new(&mut params, "batch_norm.0", width);
        let attention = TemporalAttention::new(&mut params, "temporal_attention", config.window, &mut rng);
        let norm2 = BatchNorm::new(&mut params, "batch_norm.1", width);
        let dropout = DropoutLayer::new(config.dropout)?;
        let flat = config.window * width;
        let heads = config
            .tasks
            .iter()
            .map(|t| DenseLayer::new(&mut params, &format!("head.{t}"), flat, 1, &mut rng))
            .collect();

        let mut model = Self {
            config,
            params,
            input_projection,
            encoders,
            kan,
            recurrent_projection,
            gru,
            bigru,
            norm1,
            attention,
            norm2,
            dropout,
            heads,
            trace: Vec::new(),
        };
        model.trace = model.shape_trace()?;
        Ok(model)
    }

    /// Run a zero batch through the model and record every stage's output shape.
    fn shape_trace(&self) -> Result<Vec<StageShape>> {
        let mut s = Scope::new(&self.params, Mode::INFER, 0).with_trace();
        let x = s.input(Tensor::zeros(&[2, self.config.window, self.config.input_channels]));
        self.forward_scope(&mut s, x)?;
        Ok(s.take_trace())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn tasks(&self) -> &[String] {
        &self.config.tasks
    }

    pub fn stage_trace(&self) -> &[StageShape] {
        &self.trace
    }

    pub fn apply_running_updates(&mut self, updates: &[RunningUpdate]) {
        self.params.apply_running_updates(updates);
    }

    /// Record the forward pass on `s`; returns one `[batch, 1]` output per task.
    pub fn forward_scope(&self, s: &mut Scope<'_>, x: Var) -> Result<Vec<Var>> {
        let shape = s.graph.shape(x).to_vec();
        let (t, c) = (self.config.window, self.config.input_channels);
        if shape.len() != 3 || shape[1] != t || shape[2] != c {
            return Err(Error::dim(
                "input",
                format!("expected [batch, {t}, {c}], got {shape:?}"),
            ));
        }
        s.trace("input", x);
        let mut h = x;
        if let Some(p) = &self.input_projection {
            h = p.forward(s, h).map_err(|e| in_stage("input_projection", e))?;
            s.trace("input_projection", h);
        }
        for enc in &self.encoders {
            h = enc.encode(s, h).map_err(|e| in_stage("transformer", e))?;
            s.trace("transformer", h);
        }
        if let Some(kan) = &self.kan {
            h = kan.forward(s, h).map_err(|e| in_stage("kan", e))?;
            s.trace("kan", h);
        }
        if let Some(p) = &self.recurrent_projection {
            h = p.forward(s, h).map_err(|e| in_stage("recurrent_projection", e))?;
            s.trace("recurrent_projection", h);
        }
        if let (Some(gru), Some(bigru)) = (&self.gru, &self.bigru) {
            h = gru
                .sequence(s, h, crate::recurrent::Direction::Forward)
                .map_err(|e| in_stage("gru", e))?;
            s.trace("gru", h);
            h = bigru.forward(s, h).map_err(|e| in_stage("bidirectional", e))?;
            s.trace("bidirectional", h);
        }
        h = self.norm1.forward(s, h).map_err(|e| in_stage("batch_norm", e))?;
        s.trace("batch_norm", h);
        h = self.dropout.forward(s, h)?;
        s.trace("dropout", h);
        h = self
            .attention
            .forward(s, h)
            .map_err(|e| in_stage("temporal_attention", e))?;
        h = self.norm2.forward(s, h).map_err(|e| in_stage("batch_norm", e))?;
        s.trace("batch_norm", h);
        h = self.dropout.forward(s, h)?;
        s.trace("dropout", h);
        let batch = shape[0];
        let flat = s.graph.shape(h)[1..].iter().product::<usize>();
        h = s.graph.reshape(h, &[batch, flat])?;
        s.trace("flatten", h);
        h = self.dropout.forward(s, h)?;
        s.trace("dropout", h);
        let mut outs = Vec::with_capacity(self.heads.len());
        for (head, name) in self.heads.iter().zip(&self.config.tasks) {
            let y = head.forward(s, h).map_err(|e| in_stage("head", e))?;
            s.trace(&format!("head:{name}"), y);
            outs.push(y);
        }
        Ok(outs)
    }

    /// Per-task predictions `[batch, 1]` for a `[batch, T, C]` input.
    pub fn forward(&self, batch: &Tensor, mode: Mode, seed: u64) -> Result<Vec<Tensor>> {
        let mut s = Scope::new(&self.params, mode, seed);
        let x = s.input(batch.clone());
        let outs = self.forward_scope(&mut s, x)?;
        Ok(outs.into_iter().map(|v| s.graph.value(v).clone()).collect())
    }

    /// Inference in chunks of `chunk` windows.
    pub fn predict(&self, inputs: &Tensor, chunk: usize) -> Result<Vec<Tensor>> {
        let shape = inputs.shape().to_vec();
        let n = shape[0];
        let per = shape[1..].iter().product::<usize>();
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); self.heads.len()];
        let mut start = 0;
        while start < n {
            let end = (start + chunk.max(1)).min(n);
            let mut bshape = shape.clone();
            bshape[0] = end - start;
            let batch = Tensor::new(bshape, inputs.data()[start * per..end * per].to_vec())?;
            for (col, out) in cols.iter_mut().zip(self.forward(&batch, Mode::INFER, 0)?) {
                col.extend_from_slice(out.data());
            }
            start = end;
        }
        cols.into_iter()
            .map(|c| Tensor::new(vec![n, 1], c))
            .collect()
    }

    fn stage_kinds(&self) -> Vec<StageKind> {
        let mut k = vec![StageKind::Input];
        if self.input_projection.is_some() {
            k.push(StageKind::InputProjection);
        }
        k.extend(self.encoders.iter().map(|_| StageKind::Transformer));
        if self.kan.is_some() {
            k.push(StageKind::Kan);
        }
        if self.recurrent_projection.is_some() {
            k.push(StageKind::RecurrentProjection);
        }
        if self.gru.is_some() {
            k.extend([StageKind::Gru, StageKind::Bidirectional]);
        }
        k.extend([
            StageKind::BatchNorm,
            StageKind::Dropout,
            StageKind::Permute,
            StageKind::AttentionDense,
            StageKind::Permute,
            StageKind::Multiply,
            StageKind::BatchNorm,
            StageKind::Dropout,
            StageKind::Flatten,
            StageKind::Dropout,
        ]);
        k.extend(self.heads.iter().map(|_| StageKind::Head));
        k
    }

    /// Stage-by-stage parameter audit. For the reference configuration every
    /// row is compared with the reference layer table.
    pub fn parameter_audit(&self) -> Vec<AuditRow> {
        let kinds = self.stage_kinds();
        assert_eq!(kinds.len(), self.trace.len(), "stage list and trace out of sync");
        let reference = self.config.is_reference_shape();
        let mut encoders = self.encoders.iter();
        let mut heads = self.heads.iter().zip(&self.config.tasks);
        let mut norms = [&self.norm1, &self.norm2].into_iter();
        kinds
            .iter()
            .zip(&self.trace)
            .map(|(&kind, shape)| {
                let mut stage = kind.label().to_string();
                let params = match kind {
                    StageKind::InputProjection => self.input_projection.as_ref().map_or(0, DenseLayer::param_count),
                    StageKind::Transformer => encoders.next().map_or(0, EncoderLayer::param_count),
                    StageKind::Kan => self.kan.as_ref().map_or(0, KanNetwork::param_count),
                    StageKind::RecurrentProjection => {
                        self.recurrent_projection.as_ref().map_or(0, DenseLayer::param_count)
                    }
                    StageKind::Gru => self.gru.as_ref().map_or(0, GruCell::param_count),
                    StageKind::Bidirectional => self.bigru.as_ref().map_or(0, BiGru::param_count),
                    StageKind::BatchNorm => norms.next().map_or(0, BatchNorm::param_count),
                    StageKind::AttentionDense => self.attention.param_count(),
                    StageKind::Head => {
                        let (h, name) = heads.next().expect("one head per task");
                        stage = format!("Dense (head: {name})");
                        h.param_count()
                    }
                    StageKind::Input
                    | StageKind::Dropout
                    | StageKind::Permute
                    | StageKind::Multiply
                    | StageKind::Flatten => 0,
                };
                let output_shape = shape.display_shape();
                let (table_params, status, note) = match (reference, kind.reference()) {
                    (false, _) => (None, AuditStatus::NotReference, String::new()),
                    (true, None) => (
                        None,
                        AuditStatus::NotInTable,
                        "inserted to make neighbouring table shapes compose".to_string(),
                    ),
                    (true, Some((want, want_shape))) => {
                        let shape_ok = want_shape.is_empty() || want_shape == output_shape;
                        if want == params && shape_ok {
                            (Some(want), AuditStatus::Match, String::new())
                        } else {
                            let note = match kind {
                                StageKind::Bidirectional => format!(
                                    "table value equals a bidirectional LSTM ({} parameters); BiGRU computes {params}",
                                    2 * lstm_param_count(self.config.gru_hidden, self.config.bigru_hidden)
                                ),
                                StageKind::Kan => format!(
                                    "table shape {want_shape} does not compose with its neighbours; implemented as width-preserving"
                                ),
                                _ => format!("table lists {want}, true count is {params}"),
                            };
                            (Some(want), AuditStatus::TableInconsistent, note)
                        }
                    }
                };
                AuditRow {
                    stage,
                    output_shape,
                    params,
                    table_params,
                    status,
                    note,
                }
            })
            .collect()
    }

    /// Names of the core stages present, each with its parameter count.
    pub fn block_sizes(&self) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        if let Some(p) = &self.input_projection {
            out.push(("input_projection", p.param_count()));
        }
        if !self.encoders.is_empty() {
            out.push(("transformer", self.encoders.iter().map(EncoderLayer::param_count).sum()));
        }
        if let Some(k) = &self.kan {
            out.push(("kan", k.param_count()));
        }
        if let Some(g) = &self.gru {
            out.push(("gru", g.param_count()));
        }
        if let Some(b) = &self.bigru {
            out.push(("bidirectional", b.param_count()));
        }
        out
    }

    /// Registry name prefixes of each active stage, for gradient-flow checks.
    pub fn stage_prefixes(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.input_projection.is_some() {
            p.push("input_projection".to_string());
        }
        p.extend((0..self.encoders.len()).map(|i| format!("encoder.{i}")));
        if self.kan.is_some() {
            p.push("kan".into());
        }
        if self.recurrent_projection.is_some() {
            p.push("recurrent_projection".into());
        }
        if self.gru.is_some() {
            p.push("gru.".into());
            p.push("bigru".into());
        }
        p.extend(["batch_norm.0".into(), "temporal_attention".into(), "batch_norm.1".into()]);
        p.extend(self.config.tasks.iter().map(|t| format!("head.{t}")));
        p
    }
}

/// Render an audit as a fixed-width text table.
pub fn format_audit(rows: &[AuditRow]) -> String {
    let mut out = format!(
        "{:<40} {:<18} {:>9} {:>9}  {}\n",
        "Layer (type)", "Output Shape", "Param#", "Table", "Status"
    );
    for r in rows {
        let table = r.table_params.map_or("-".to_string(), |v| v.to_string());
        let status = match r.status {
            AuditStatus::Match => "match",
            AuditStatus::TableInconsistent => "table-inconsistent",
            AuditStatus::NotInTable => "not-in-table",
            AuditStatus::NotReference => "-",
        };
        out.push_str(&format!(
            "{:<40} {:<18} {:>9} {:>9}  {}{}\n",
            r.stage,
            r.output_shape,
            r.params,
            table,
            status,
            if r.note.is_empty() { String::new() } else { format!(" ({})", r.note) }
        ));
    }
    out
}
