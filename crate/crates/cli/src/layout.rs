//! On-disk layout of a data directory.
//!
//! ```text
//! <data>/manifest.jsonl         input detections (from synth or an exporter)
//! <data>/records.jsonl          ingested detections with their record ids
//! <data>/splits.json            fold assignment
//! <data>/ingest.json            ingest parameters, counts and digest
//! <data>/class_stats.csv        per-class view and instance counts
//! <data>/features/<id>.<stream>.rten
//! <data>/features/features.json extractor settings, shape and digest
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reobj_core::dataset::{DetectionRecord, SplitAssignment};
use reobj_core::encoding::{concat_features, read_tensor, ExtractorConfig, FeatureMap};
use serde::{Deserialize, Serialize};

use crate::cmd::ingest::IngestParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Fg,
    Bg,
    Full,
}

impl Stream {
    pub const ALL: [Stream; 3] = [Stream::Fg, Stream::Bg, Stream::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Fg => "fg",
            Stream::Bg => "bg",
            Stream::Full => "full",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.jsonl")
    }

    pub fn records(&self) -> PathBuf {
        self.root.join("records.jsonl")
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("splits.json")
    }

    pub fn ingest_report(&self) -> PathBuf {
        self.root.join("ingest.json")
    }

    pub fn class_stats(&self) -> PathBuf {
        self.root.join("class_stats.csv")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn features_index(&self) -> PathBuf {
        self.features_dir().join("features.json")
    }

    pub fn feature(&self, record_id: &str, stream: Stream) -> PathBuf {
        feature_file(&self.features_dir(), record_id, stream)
    }

    pub fn is_ingested(&self) -> bool {
        self.records().is_file() && self.splits().is_file() && self.ingest_report().is_file()
    }

    pub fn load_records(&self) -> Result<Vec<DetectionRecord>> {
        read_records(&self.records())
    }

    pub fn load_splits(&self) -> Result<SplitAssignment> {
        read_json(&self.splits())
    }

    pub fn load_ingest(&self) -> Result<IngestReport> {
        read_json(&self.ingest_report())
    }

    pub fn load_features_index(&self) -> Result<FeaturesIndex> {
        read_json(&self.features_index()).context("no features found; run `reobj features` first")
    }

    pub fn load_stream(&self, record_id: &str, stream: Stream) -> Result<FeatureMap> {
        let path = self.feature(record_id, stream);
        read_tensor(&path).with_context(|| format!("reading {}", path.display()))
    }

    pub fn load_concat(&self, record_id: &str) -> Result<FeatureMap> {
        let fg = self.load_stream(record_id, Stream::Fg)?;
        let bg = self.load_stream(record_id, Stream::Bg)?;
        Ok(concat_features(&fg, &bg)
            .with_context(|| format!("joining streams of {record_id}"))?
            .map)
    }
}

pub fn feature_file(dir: &Path, record_id: &str, stream: Stream) -> PathBuf {
    dir.join(format!("{record_id}.{}.rten", stream.as_str()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub config_digest: String,
    pub params: IngestParams,
    /// Directory that image paths in the records are relative to.
    pub images_dir: PathBuf,
    /// Directory holding the source manifest.
    pub manifest_dir: PathBuf,
    pub total: usize,
    pub valid: usize,
    pub invalid: usize,
    pub unvalidatable: usize,
    pub kept: usize,
    pub train_only_instances: Vec<String>,
    /// `(train, test)` view counts per fold.
    pub fold_sizes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeaturesIndex {
    pub config_digest: String,
    pub extractor: ExtractorConfig,
    /// `(height, width, channels)` of every per-stream map.
    pub shape: (usize, usize, usize),
    pub count: usize,
}

/// Ingested records keep the id they were given at ingest time, so ids stay
/// stable when some detections of a frame were dropped.
#[derive(Serialize, Deserialize)]
struct StoredRecord {
    record_id: String,
    #[serde(flatten)]
    record: DetectionRecord,
}

pub fn write_records(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        let line = serde_json::to_string(&StoredRecord {
            record_id: r.record_id.clone(),
            record: r.clone(),
        })?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}; run `reobj ingest` first", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let stored: StoredRecord =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        let mut rec = stored.record;
        rec.record_id = stored.record_id;
        rec.check_invariants()
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Record lookup by id for one fold side.
pub fn select<'a>(
    by_id: &HashMap<&str, &'a DetectionRecord>,
    ids: &[String],
) -> Result<Vec<&'a DetectionRecord>> {
    ids.iter()
        .map(|id| match by_id.get(id.as_str()) {
            Some(r) => Ok(*r),
            None => bail!("split refers to unknown record {id}"),
        })
        .collect()
}
