//! Detection ingestion: manifests, ground-truth validation, crop geometry,
//! foreground/background separation and cross-validation splits.

mod bbox;
mod crop;
mod mask;
mod record;
mod split;

pub use bbox::{compute_iou, expand_bbox, BBox};
pub use crop::{crop_resize_split, resize_bilinear, CropPair};
pub use mask::MaskBitmap;
pub use record::{
    class_statistics, load_manifest, parse_manifest, validate_detection, write_manifest,
    ClassStats, DetectionRecord, ManifestLineError, Validation, DEFAULT_IOU_THRESHOLD,
};
pub use split::{make_splits, Fold, Partition, SplitAssignment};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid box {0:?}: width and height must be positive")]
    InvalidBox([i64; 4]),

    #[error("mask run lengths sum to {got}, expected {expected} ({width}x{height})")]
    MaskLength {
        width: u32,
        height: u32,
        expected: u64,
        got: u64,
    },

    #[error("mask is {mask_w}x{mask_h} but detection box is {box_w}x{box_h}")]
    MaskShape {
        mask_w: u32,
        mask_h: u32,
        box_w: u32,
        box_h: u32,
    },

    #[error("score {0} outside [0, 1]")]
    Score(f64),

    #[error("expanded box is degenerate after clamping to a {img_w}x{img_h} image")]
    DegenerateCrop { img_w: u32, img_h: u32 },

    #[error("box {bbox:?} does not lie within the {img_w}x{img_h} image")]
    OutsideImage { bbox: BBox, img_w: u32, img_h: u32 },

    #[error("manifest has {} malformed line(s); first at line {}: {}", .0.len(), .0[0].line, .0[0].message)]
    Manifest(Vec<ManifestLineError>),

    #[error("cannot split an empty record list")]
    EmptySplit,

    #[error("fold count must be at least 2, got {0}")]
    FoldCount(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;
