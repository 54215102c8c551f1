//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "HYBRIDCK"
//! version    u32
//! manifest   u64 length, then UTF-8 JSON
//! payload    every tensor's f64 values, little-endian, in manifest order
//! ```
//!
//! The manifest carries the model configuration, stage list, tensor names and
//! shapes, the seed, the data spec and the fitted normalizer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Normalizer, WindowSpec};
use crate::error::{Error, Result};
use crate::model::{HybridModel, ModelConfig};
use crate::nn::ParamSet;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"HYBRIDCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub config: ModelConfig,
    pub stages: Vec<String>,
    pub tensors: Vec<TensorRecord>,
    pub data: Option<WindowSpec>,
    pub normalizer: Option<Normalizer>,
}

/// A trained model together with what is needed to feed it raw data.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: HybridModel,
    pub data: Option<WindowSpec>,
    pub normalizer: Option<Normalizer>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.model.params();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            seed: self.model.config().seed,
            config: self.model.config().clone(),
            stages: self
                .model
                .stage_trace()
                .iter()
                .map(|s| format!("{} {}", s.stage, s.display_shape()))
                .collect(),
            tensors: params
                .entries()
                .iter()
                .map(|e| TensorRecord {
                    name: e.name.clone(),
                    shape: e.tensor.shape().to_vec(),
                    trainable: e.trainable,
                })
                .collect(),
            data: self.data.clone(),
            normalizer: self.normalizer.clone(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let payload: usize = params.entries().iter().map(|e| e.tensor.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for e in params.entries() {
            for v in e.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(body)?;
        let mut offset = 20 + len;
        let mut loaded = ParamSet::new();
        for rec in &manifest.tensors {
            let n: usize = rec.shape.iter().product();
            let raw = bytes
                .get(offset..offset + 8 * n)
                .ok_or_else(|| Error::Checkpoint(format!("truncated payload at tensor `{}`", rec.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            loaded.add(rec.name.clone(), Tensor::new(rec.shape.clone(), data)?, rec.trainable);
            offset += 8 * n;
        }
        if offset != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        let mut model = HybridModel::build(manifest.config)?;
        model.params_mut().load_from(&loaded)?;
        Ok(Self {
            model,
            data: manifest.data,
            normalizer: manifest.normalizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }
}
