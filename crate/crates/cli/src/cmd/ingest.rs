use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use reobj_core::dataset::{
    class_statistics, load_manifest, make_splits, validate_detection, DetectionRecord, Validation,
    DEFAULT_IOU_THRESHOLD,
};
use serde::{Deserialize, Serialize};

use crate::cmd::csv_writer;
use crate::config::{resolve, run_digest, FileDefaults};
use crate::layout::{write_json, write_records, DataDir, IngestReport};

/// Validate detections against ground truth and assign folds.
#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    #[serde(skip)]
    pub manifest: PathBuf,
    /// Image paths in the manifest are relative to this directory
    /// (default: the manifest's directory).
    #[arg(long)]
    #[serde(skip)]
    pub images: Option<PathBuf>,
    /// A detection is kept when its IoU with the ground truth is strictly
    /// above this value and the labels agree.
    #[arg(long)]
    pub iou: Option<f64>,
    /// Border added around each detection box before cropping, in pixels.
    #[arg(long)]
    pub border: Option<u32>,
    /// Side of the square resized crop.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep detections that carry no ground truth instead of dropping them.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub keep_unvalidated: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    pub iou: f64,
    pub border: u32,
    pub size: usize,
    pub folds: usize,
    pub seed: u64,
    pub keep_unvalidated: bool,
}

impl Default for IngestParams {
    fn default() -> Self {
        Self {
            iou: DEFAULT_IOU_THRESHOLD,
            border: 10,
            size: 224,
            folds: 3,
            seed: 0,
            keep_unvalidated: false,
        }
    }
}

pub fn run(args: &IngestArgs, defaults: &FileDefaults) -> Result<()> {
    let params: IngestParams = resolve(args, defaults.section("ingest")?, "ingest")?;
    let manifest_dir = parent_dir(&args.manifest);
    let images = args.images.clone().unwrap_or_else(|| manifest_dir.clone());
    ingest(&args.manifest, &images, &params, &DataDir::new(&args.out))?;
    Ok(())
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn ingest(manifest: &Path, images: &Path, params: &IngestParams, out: &DataDir) -> Result<IngestReport> {
    let records = load_manifest(manifest).with_context(|| format!("loading manifest {}", manifest.display()))?;
    let digest = run_digest("ingest", params, &[]);

    let (mut valid, mut invalid, mut unvalidatable) = (0, 0, 0);
    let mut kept: Vec<DetectionRecord> = Vec::new();
    for rec in records.iter() {
        match validate_detection(rec, params.iou) {
            Validation::Valid { .. } => {
                valid += 1;
                kept.push(rec.clone());
            }
            Validation::Invalid { iou, label_match } => {
                invalid += 1;
                log::debug!("dropping {}: iou {iou:.3}, label match {label_match}", rec.record_id);
            }
            Validation::Unvalidatable { missing } => {
                unvalidatable += 1;
                if params.keep_unvalidated {
                    kept.push(rec.clone());
                } else {
                    log::debug!("dropping {}: missing {}", rec.record_id, missing.join(", "));
                }
            }
        }
    }
    if unvalidatable > 0 {
        log::warn!(
            "{unvalidatable} detections have no ground truth and were {}",
            if params.keep_unvalidated { "kept" } else { "dropped" }
        );
    }

    let splits = make_splits(&kept, params.folds, params.seed).context("assigning folds")?;
    if !splits.train_only_instances.is_empty() {
        log::warn!(
            "{} instances have fewer than {} views and are train-only",
            splits.train_only_instances.len(),
            params.folds
        );
    }

    std::fs::create_dir_all(out.root())?;
    write_records(&out.records(), &kept)?;
    write_json(&out.splits(), &splits)?;

    let mut w = csv_writer(&out.class_stats())?;
    w.write_record(["class", "views", "instances", "config_digest"])?;
    for (class, s) in class_statistics(&kept) {
        w.write_record([class, s.views.to_string(), s.instances.to_string(), digest.clone()])?;
    }
    w.flush()?;

    let report = IngestReport {
        config_digest: digest,
        params: params.clone(),
        images_dir: absolute(images)?,
        manifest_dir: absolute(&parent_dir(manifest))?,
        total: records.len(),
        valid,
        invalid,
        unvalidatable,
        kept: kept.len(),
        train_only_instances: splits.train_only_instances.clone(),
        fold_sizes: splits.folds.iter().map(|f| (f.train.len(), f.test.len())).collect(),
    };
    write_json(&out.ingest_report(), &report)?;
    log::info!(
        "ingested {} of {} detections ({invalid} invalid, {unvalidatable} without ground truth)",
        report.kept,
        report.total
    );
    Ok(report)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    p.canonicalize().with_context(|| format!("resolving {}", p.display()))
}
