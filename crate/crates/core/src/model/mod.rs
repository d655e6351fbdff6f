//! The multi-task double-equivariant network: soft task-aware layers over
//! per-relation node states, a triplet scorer, and checkpoints.

mod checkpoint;
mod config;
mod forward;
mod layers;
mod params;
mod view;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, checkpoint_load, checkpoint_save, CHECKPOINT_HEADER,
};
pub use config::{Aggregation, LayerKind, ModelConfig};
pub use forward::{
    forward, forward_tape, mtde_layer_soft, score_tape, score_triplets, BoundParams, ModelScorer,
    RelationStates, Trainable,
};
pub use layers::{mtde_layer_hard, BoundLayer, BoundMlp, NORMALIZER_FLOOR};
pub use params::{AttentionWeights, Mlp, ModelParams, MtdeParams, LOGIT_INIT_SCALE};
pub use view::GraphView;
