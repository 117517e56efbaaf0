//! A small CPU network engine: tensors, layers with hand-written backward
//! passes, losses, Adam, gradient checking, and the two quality models.

mod gradcheck;
mod layers;
mod loss;
mod network;
mod optim;
mod tensor;
mod train;

pub use gradcheck::{
    check_function, gradient_check, relative_error, GradCheckConfig, GradEntry, GradReport,
};
pub use layers::{backward_seq, forward_seq, BatchNorm, Conv2d, Layer, Linear, Mode};
pub use loss::{loss_generator, loss_l1, loss_mse, loss_ssim, LossOutput, DEFAULT_ALPHA};
pub use network::{
    build_generator, build_pooling_net, LayerSpec, ModelSpec, Network, ARCH_ENTRY, DESK_GENERATOR,
    FULL_GENERATOR, POOLING_DILATIONS, POOLING_HIDDEN,
};
pub use optim::{Adam, TrainConfig};
pub use tensor::{Scalar, Tensor};
pub use train::{
    extract_patches, generate_map, pooling_forward, train_generator, train_pooling,
    train_pooling_monitored, PatchPair, PoolingSample, TrainReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("weights: {0}")]
    Weights(String),
}
