use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use reobj_core::encoding::{JointEmbeddingInput, Provenance};
use reobj_core::tripletnet::{
    train, write_model, FeatureSource, HeadConfig, ModelError, Sample, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::cmd::csv_writer;
use crate::config::{resolve, run_digest, FileDefaults};
use crate::layout::{select, write_json, DataDir, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Foreground and background maps stacked along channels.
    Concat,
    /// The unsplit crop's map.
    Full,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Concat => "concat",
            TrainMode::Full => "full",
        }
    }
}

/// Fit the embedding head on the training views of one fold.
#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub mode: Option<TrainMode>,
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability of drawing the negative from the anchor's class.
    #[arg(long = "same-class-fraction")]
    pub same_class_negative_fraction: Option<f64>,
    #[arg(long)]
    pub conv1_channels: Option<usize>,
    #[arg(long)]
    pub conv2_channels: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Model file (default: `<data>/model-<mode>.rmdl`).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// CSV of the mean triplet loss per epoch.
    #[arg(long)]
    #[serde(skip)]
    pub loss_log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub mode: TrainMode,
    pub fold: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub same_class_negative_fraction: f64,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub embed_dim: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = TrainConfig::default();
        let h = HeadConfig::new(1);
        Self {
            mode: TrainMode::Concat,
            fold: 0,
            margin: t.margin,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            same_class_negative_fraction: t.same_class_negative_fraction,
            conv1_channels: h.conv1_channels,
            conv2_channels: h.conv2_channels,
            embed_dim: h.embed_dim,
        }
    }
}

impl TrainParams {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            margin: self.margin,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            same_class_negative_fraction: self.same_class_negative_fraction,
        }
    }
}

/// Written next to the model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config_digest: String,
    pub mode: TrainMode,
    pub params: TrainParams,
    pub head: HeadConfig,
    pub epoch_losses: Vec<f64>,
    pub zero_embeddings: usize,
}

pub fn meta_path(model: &std::path::Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Reads feature maps from disk on demand so the whole set is never held in
/// memory.
struct DiskFeatures<'a> {
    data: &'a DataDir,
    mode: TrainMode,
}

impl FeatureSource for DiskFeatures<'_> {
    fn load(&self, sample: &Sample) -> reobj_core::tripletnet::Result<JointEmbeddingInput> {
        let id = &sample.record_id;
        let loaded = match self.mode {
            TrainMode::Concat => self.data.load_concat(id).map(|m| JointEmbeddingInput::single(m, Provenance::Concat)),
            TrainMode::Full => self
                .data
                .load_stream(id, Stream::Full)
                .map(|m| JointEmbeddingInput::single(m, Provenance::Full)),
        };
        loaded.map_err(|e| {
            log::error!("{e:#}");
            ModelError::MissingFeatures(id.clone())
        })
    }
}

pub fn run(args: &TrainArgs, defaults: &FileDefaults) -> Result<()> {
    let params: TrainParams = resolve(args, defaults.section("train")?, "train")?;
    let data = DataDir::new(&args.data);
    let index = data.load_features_index()?;
    let splits = data.load_splits()?;
    let records = data.load_records()?;
    let Some(fold) = splits.folds.get(params.fold) else {
        bail!("fold {} does not exist ({} folds)", params.fold, splits.folds.len());
    };
    let by_id: HashMap<&str, _> = records.iter().map(|r| (r.record_id.as_str(), r)).collect();
    let samples: Vec<Sample> = select(&by_id, &fold.train)?
        .into_iter()
        .map(|r| Sample {
            record_id: r.record_id.clone(),
            instance_id: r.instance_id.clone(),
            class_label: r.class_label.clone(),
        })
        .collect();

    let in_channels = match params.mode {
        TrainMode::Concat => 2 * index.shape.2,
        TrainMode::Full => index.shape.2,
    };
    let head = HeadConfig {
        in_channels,
        conv1_channels: params.conv1_channels,
        conv2_channels: params.conv2_channels,
        embed_dim: params.embed_dim,
    };
    head.validate()?;
    let digest = run_digest("train", &params, std::slice::from_ref(&index.config_digest));
    log::info!(
        "training {} head on {} views of fold {} ({} input channels)",
        params.mode.as_str(),
        samples.len(),
        params.fold,
        in_channels
    );
    let source = DiskFeatures {
        data: &data,
        mode: params.mode,
    };
    let outcome = train(samples, &source, head, &params.train_config()).context("training failed")?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| data.root().join(format!("model-{}.rmdl", params.mode.as_str())));
    write_model(&out, &outcome.params).with_context(|| format!("writing {}", out.display()))?;
    write_json(
        &meta_path(&out),
        &ModelMeta {
            config_digest: digest.clone(),
            mode: params.mode,
            params: params.clone(),
            head,
            epoch_losses: outcome.epoch_losses.clone(),
            zero_embeddings: outcome.zero_embeddings,
        },
    )?;
    if let Some(path) = &args.loss_log {
        let mut w = csv_writer(path)?;
        w.write_record(["epoch", "mean_loss", "config_digest"])?;
        for (i, l) in outcome.epoch_losses.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string(), digest.clone()])?;
        }
        w.flush()?;
    }
    log::info!("wrote {}", out.display());
    Ok(())
}
