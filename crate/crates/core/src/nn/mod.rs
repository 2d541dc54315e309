//! A small differentiable engine for the fixed edge architecture.
//!
//! Activations are stored channel-major: a tensor with `C` channels over a
//! batch of `N` windows of length `L` is a `C × (N·L)` row-major matrix, so
//! each convolution is one matrix product against the unfolded input.

mod adam;
mod calibrate;
mod checkpoint;
mod gradcheck;
mod layers;
mod model;
mod real;
mod train;
mod weights;

pub use adam::AdamState;
pub use calibrate::calibrate_bn;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{check_gradients, check_gradients_unfrozen, relative_error, GradCheckReport, TensorError, REL_ERROR_FLOOR};
pub use model::{
    backward, bce_loss, forward, forward_with_masks, loss_and_gradients, predict, Batch, BatchStats, DropoutMasks,
    Mode, TrainStep, BCE_CLAMP,
};
pub use real::Real;
pub use train::{evaluate, train_local, train_on, ExampleSource, TrainReport};
pub use weights::{init_model, ModelWeights, Param, TensorSpec, Weights, TENSORS};

pub const INPUT_CHANNELS: usize = 2;
pub const CONV1_FILTERS: usize = 10;
pub const CONV2_FILTERS: usize = 100;
pub const KERNEL: usize = 30;
pub const DENSE_UNITS: usize = 20;
pub const DROPOUT_CONV: f64 = 0.3;
pub const DROPOUT_DENSE: f64 = 0.5;
pub const BN_EPS: f64 = 1e-3;

/// Optimizer and schedule settings for local training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without an improvement of at least `min_delta` before stopping.
    pub patience: usize,
    pub min_delta: f64,
    pub bn_momentum: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            max_epochs: 20,
            patience: 3,
            min_delta: 1e-4,
            bn_momentum: 0.99,
        }
    }
}
