use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{compute_iou, BBox, DatasetError, MaskBitmap, Result};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.6;

/// One detected object in one frame, together with the ground truth it was
/// matched against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// Derived on load from scene, frame and the detection's ordinal within
    /// its frame. Not part of the manifest line.
    #[serde(skip)]
    pub record_id: String,
    pub scene_id: String,
    pub frame_id: String,
    pub image_path: String,
    pub class_label: String,
    pub instance_id: String,
    pub det_bbox: BBox,
    #[serde(default)]
    pub gt_bbox: Option<BBox>,
    #[serde(default)]
    pub gt_label: Option<String>,
    pub mask: MaskBitmap,
    pub score: f64,
}

impl DetectionRecord {
    pub fn check_invariants(&self) -> Result<()> {
        if self.mask.width() != self.det_bbox.w || self.mask.height() != self.det_bbox.h {
            return Err(DatasetError::MaskShape {
                mask_w: self.mask.width(),
                mask_h: self.mask.height(),
                box_w: self.det_bbox.w,
                box_h: self.det_bbox.h,
            });
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(DatasetError::Score(self.score));
        }
        Ok(())
    }
}

/// Builds a filesystem-safe id: `<scene>__<frame>__<ordinal>`.
pub(crate) fn make_record_id(scene: &str, frame: &str, ordinal: usize) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    format!("{}__{}__{}", clean(scene), clean(frame), ordinal)
}

/// Outcome of matching a detection against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Valid { iou: f64 },
    Invalid { iou: f64, label_match: bool },
    /// The record carries no ground truth; lists the missing fields.
    Unvalidatable { missing: Vec<&'static str> },
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid { .. })
    }
}

/// A detection is valid when its IoU with the ground-truth box is strictly
/// above `iou_threshold` and its class label equals the ground-truth label.
pub fn validate_detection(rec: &DetectionRecord, iou_threshold: f64) -> Validation {
    let (gt_bbox, gt_label) = match (&rec.gt_bbox, &rec.gt_label) {
        (Some(b), Some(l)) => (b, l),
        (b, l) => {
            let mut missing = Vec::new();
            if b.is_none() {
                missing.push("gt_bbox");
            }
            if l.is_none() {
                missing.push("gt_label");
            }
            return Validation::Unvalidatable { missing };
        }
    };
    let iou = compute_iou(&rec.det_bbox, gt_bbox);
    let label_match = rec.class_label == *gt_label;
    if iou > iou_threshold && label_match {
        Validation::Valid { iou }
    } else {
        Validation::Invalid { iou, label_match }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestLineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

/// Parses JSONL manifest text. Blank lines are skipped. Every malformed line
/// is collected so the caller sees all of them at once.
pub fn parse_manifest(text: &str) -> Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut ordinals: HashMap<(String, String), usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<DetectionRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.check_invariants().map(|_| r).map_err(|e| e.to_string()));
        match parsed {
            Ok(mut rec) => {
                let n = ordinals
                    .entry((rec.scene_id.clone(), rec.frame_id.clone()))
                    .or_default();
                rec.record_id = make_record_id(&rec.scene_id, &rec.frame_id, *n);
                *n += 1;
                records.push(rec);
            }
            Err(message) => errors.push(ManifestLineError {
                line: i + 1,
                message,
            }),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(DatasetError::Manifest(errors))
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    parse_manifest(&fs::read_to_string(path)?)
}

pub fn write_manifest<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a DetectionRecord>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for rec in records {
        let line = serde_json::to_string(rec).expect("records always serialize");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Per-class view and unique-instance counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassStats {
    pub views: usize,
    pub instances: usize,
}

pub fn class_statistics<'a>(
    records: impl IntoIterator<Item = &'a DetectionRecord>,
) -> BTreeMap<String, ClassStats> {
    let mut per_class: BTreeMap<String, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for r in records {
        let e = per_class.entry(r.class_label.clone()).or_default();
        e.0 += 1;
        e.1.insert(&r.instance_id);
    }
    per_class
        .into_iter()
        .map(|(k, (views, inst))| {
            (
                k,
                ClassStats {
                    views,
                    instances: inst.len(),
                },
            )
        })
        .collect()
}
