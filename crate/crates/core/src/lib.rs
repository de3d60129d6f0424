//! Joint foreground/background metric learning for object instance
//! re-identification.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`dataset`]: detection manifests, ground-truth validation, crop geometry,
//!   foreground/background separation and cross-validation splits.
//! * [`encoding`]: feature extraction, fg/bg concatenation and the `RTEN`
//!   tensor file format.
//! * [`tripletnet`]: the trainable embedding head, its hand-written backward
//!   pass, the triplet ranking loss, triplet sampling and SGD training.
//! * [`eval`]: gallery/probe ranking, rank-k accuracy, CMC curves and the
//!   synthetic rigid-scene benchmark.

pub mod dataset;
pub mod encoding;
pub mod eval;
pub mod raster;
pub mod tripletnet;

pub use dataset::{BBox, CropPair, DetectionRecord, MaskBitmap, SplitAssignment};
pub use encoding::{FeatureMap, JointEmbeddingInput, Provenance};
pub use eval::{CmcCurve, GalleryIndex, MetricsReport};
pub use raster::Raster;
pub use tripletnet::{ConvBlock, ConvBlockParams, Embedding, TrainConfig};
