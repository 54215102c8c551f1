//! Parameter registry, forward-pass scope and the generic layers used around
//! the encoder, KAN and recurrent cores.

mod layers;
mod params;

pub use layers::{
    glorot_bound, layer_norm, BatchNorm, DenseLayer, DropoutLayer, LayerNorm, TemporalAttention,
    BATCH_NORM_EPS, BATCH_NORM_MOMENTUM, DEFAULT_DROPOUT, LAYER_NORM_EPS,
};
pub(crate) use layers::check_trailing;
pub use params::{Mode, ParamEntry, ParamId, ParamSet, RunningUpdate, Scope, StageShape};
