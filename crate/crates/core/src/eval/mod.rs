//! Gallery/probe evaluation and the synthetic rigid-scene benchmark.

mod gallery;
mod metrics;
mod synth;

pub use gallery::{
    build_gallery, rank_probe, rank_probe_with, Embedder, EvalMode, GalleryEntry, GalleryIndex, GalleryItem,
    RawEmbedder,
};
pub use metrics::{cmc_curve, first_hit_ranks, rank_k_accuracy, CmcCurve, MetricsReport, ProbeOutcome, DEFAULT_KS};
pub use synth::{synth_benchmark, Appearance, SynthConfig, SynthDataset};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gallery is empty")]
    EmptyGallery,

    #[error("duplicate record id {0} in gallery")]
    DuplicateRecord(String),

    #[error("embedding length mismatch: {record} has {got}, expected {expected}")]
    Dimension { record: String, expected: usize, got: usize },

    #[error("probe {0} is not in the gallery")]
    UnknownProbe(String),

    #[error("invalid synthetic benchmark config: {0}")]
    SynthConfig(String),

    #[error(transparent)]
    Model(#[from] crate::tripletnet::ModelError),

    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
