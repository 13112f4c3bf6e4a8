//! Multimodal helper: vocabulary, conditional attention mask, model, training and responders.

pub mod agents;
pub mod mask;
pub mod model;
pub mod train;
pub mod vocab;

use thiserror::Error;

use crate::neuralcore::NeuralError;
use crate::world::WorldError;

pub use agents::{EchoHelper, EmptyHelper, ModelHelper, OracleHelper};
pub use mask::{allowed, assemble_mask, base_mask, sparsity_loss, sparsity_value, CosAttentionMask};
pub use model::{ForwardOut, HelperConfig, HelperModel, LossVars, MlmExample, ModelInput};
pub use train::{
    build_samples, build_vocab, make_example, mlm_corrupt, train_step, MultimodalBatch, StepLosses, TrainConfig,
    TrainLogEntry, TrainOutcome, Trainer, TrainingSample,
};
pub use vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum HelperError {
    #[error("invalid helper configuration: {0}")]
    Config(String),
    #[error("training data: {0}")]
    Data(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    World(#[from] WorldError),
}
