//! Multi-task hybrid time-series forecaster.
//!
//! The full model chains a Transformer encoder, a Kolmogorov–Arnold (B-spline)
//! layer, a GRU and a bidirectional GRU, then a temporal-attention head and one
//! dense regression head per task. Everything runs on a small dense `f64`
//! tensor type with tape-based reverse-mode differentiation ([`autodiff`]).
//!
//! Module map:
//!
//! * [`tensor`], [`autodiff`], [`gradcheck`]: numeric substrate.
//! * [`nn`]: parameter registry, dense / norm / dropout / temporal attention.
//! * [`attention`], [`kan`], [`recurrent`]: the three core blocks.
//! * [`model`], [`checkpoint`]: assembly, ablation variants, audit, persistence.
//! * [`data`], [`training`], [`metrics`]: pipeline, optimization, evaluation.
//! * [`harness`]: the operations behind the `hybridcast` command line.

pub mod attention;
pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod kan;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod recurrent;
pub mod tensor;
pub mod training;

pub use autodiff::{Gradients, Graph, Var};
pub use error::{Error, ErrorCategory, Result};
pub use tensor::Tensor;
