//! QT-Net: a scalar message-passing network over atoms and directed edges
//! predicting per-atom N, λ, μ and Q (or molecular properties), with exact
//! reverse-mode gradients, target normalization, rotational augmentation
//! and a seeded training loop.

mod augment;
mod checkpoint;
mod config;
mod graph;
mod loss;
mod model;
mod normalize;
mod params;
pub mod tape;
mod train;

#[cfg(test)]
mod tests;

pub use augment::augment;
pub use checkpoint::{Checkpoint, Normalization, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{
    Connectivity, ElementWeighting, Head, Hyperparams, LossKind, ModelConfig, Variant, FULL_GRAPH_RBF_CUTOFF,
    LAYER_ORDER,
};
pub use graph::{build_graph, build_graph_from, Batch, GraphInstance};
pub use loss::{loss_v1, loss_v2, loss_weights, ElementWeights};
pub use model::{forward, predict, Forward};
pub use normalize::{ScalarStats, TargetStats};
pub use params::{param_count, ParamRecord, ParamSet, ATOM_OUTPUTS, INFORMED_INPUTS};
pub use train::{
    atomic_examples, loss_and_gradient, make_batch, predict_examples, set_loss, train, train_monitored, AdamW, EpochRecord, Example,
    TrainOutcome,
};
