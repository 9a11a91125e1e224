//! Small neural-network core: dense, 1-D convolution, LSTM, dropout and
//! activation layers with analytic gradients, MSE loss, ADAM with a step
//! learning-rate schedule, a finite-difference gradient checker and a binary
//! checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

use thiserror::Error;

pub use layers::{conv1d_forward, dense_forward, dropout, lstm_forward, Activation, LstmParams};
pub use network::{validate_specs, LayerSpec, ModelState, Network};
pub use optim::{adam_step, lr_at, mse_loss, TrainConfig};
pub use tensor::Tensor;
pub use train::{evaluate_loss, fit, EpochLoss, LossHistory, TrainingSet};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("epoch {epoch} outside 1..={epochs}")]
    EpochOutOfRange { epoch: usize, epochs: usize },
    #[error("invalid layer specification: {0}")]
    InvalidSpec(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training set")]
    EmptyTrainSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
