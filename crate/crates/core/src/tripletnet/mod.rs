//! The trainable embedding head and everything needed to fit it with a
//! triplet ranking loss.

mod convblock;
mod loss;
mod params;
mod rmdl;
mod sampler;
mod train;

pub use convblock::{ConvBlock, Embedding, ForwardCache, InputGradient};
pub use loss::{distance, triplet_loss, triplet_loss_grad, TripletGrad};
pub use params::{ConvBlockParams, HeadConfig};
pub use rmdl::{decode_model, encode_model, read_model, write_model, RMDL_MAGIC};
pub use sampler::{Sample, Triplet, TripletRef, TripletSampler};
pub use train::{train, FeatureSource, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has {got} channels, model expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("input spatial size {h}x{w} is empty")]
    EmptyInput { h: usize, w: usize },

    #[error("forward cache is stale: parameters changed since the forward pass")]
    StaleCache,

    #[error("gradient has length {got}, expected {expected}")]
    GradientLength { expected: usize, got: usize },

    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("need at least one instance with two or more views to form a positive pair")]
    NoPositivePairs,

    #[error("need at least two instances to draw negatives, found {0}")]
    TooFewInstances(usize),

    #[error("missing features for sample {0}")]
    MissingFeatures(String),

    #[error("bad magic: expected \"RMDL\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported RMDL version {0}")]
    Version(u8),

    #[error("truncated model file at byte {0}")]
    Truncated(usize),

    #[error("model file tensor {name}: {problem}")]
    Tensor { name: String, problem: String },

    #[error(transparent)]
    Encoding(#[from] crate::encoding::EncodingError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
