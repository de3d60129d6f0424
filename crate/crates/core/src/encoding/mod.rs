//! Feature maps: extraction, fg/bg concatenation and the `RTEN` file format.

mod feature_map;
mod rten;
mod toy;

pub use feature_map::{concat_features, flatten_features, FeatureMap, JointEmbeddingInput, Provenance};
pub use rten::{decode_tensor, encode_tensor, read_tensor, write_tensor, RTEN_MAGIC};
pub use toy::{toy_extract, ExtractorConfig, ExtractorKind, TOY_CHANNELS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("data length {got} does not match shape {h}x{w}x{c}")]
    DataLength { h: usize, w: usize, c: usize, got: usize },

    #[error("feature map contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("spatial shape mismatch: fg is {fg:?}, bg is {bg:?}")]
    ShapeMismatch { fg: (usize, usize, usize), bg: (usize, usize, usize) },

    #[error("image {width}x{height} must be square")]
    NotSquare { width: usize, height: usize },

    #[error("image side {side} is smaller than grid {grid}")]
    ImageSmallerThanGrid { side: usize, grid: usize },

    #[error("invalid extractor config: {0}")]
    Config(String),

    #[error("bad magic: expected \"RTEN\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported RTEN version {0}")]
    Version(u8),

    #[error("unsupported dtype code {0} (only 0 = f32)")]
    Dtype(u8),

    #[error("unsupported ndim {0} (expected 3)")]
    Ndim(u8),

    #[error("truncated tensor: need {expected} bytes, have {got}")]
    Truncated { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EncodingError>;
