use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use reobj_core::encoding::FeatureMap;
use reobj_core::eval::{
    build_gallery, first_hit_ranks, CmcCurve, Embedder, EvalMode, GalleryItem, MetricsReport, RawEmbedder,
    DEFAULT_KS,
};
use reobj_core::tripletnet::{distance, read_model, ConvBlock};
use serde::{Deserialize, Serialize};

use crate::cmd::csv_writer;
use crate::cmd::train::{meta_path, ModelMeta};
use crate::config::{resolve, run_digest, FileDefaults};
use crate::layout::{read_json, select, DataDir, Stream};

/// Leave-one-out rank-k evaluation over the test views of one fold.
#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub mode: Option<EvalMode>,
    /// Trained model, required for `full` and `concat`.
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    pub fold: Option<usize>,
    /// Comma-separated ranks to report.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// Feature stream matched by `no-train` (default: the whole crop).
    #[arg(long)]
    pub stream: Option<Stream>,
    /// Only match views that share the probe's scene.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub within_scene: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metrics CSV (default: `<data>/metrics.csv`).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Also write the CMC curve to this CSV.
    #[arg(long)]
    #[serde(skip)]
    pub cmc: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub mode: EvalMode,
    pub fold: usize,
    pub ranks: Vec<usize>,
    pub stream: Option<Stream>,
    pub within_scene: bool,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            mode: EvalMode::NoTrain,
            fold: 0,
            ranks: DEFAULT_KS.to_vec(),
            stream: None,
            within_scene: false,
            seed: 0,
        }
    }
}

/// Label written to the `mode` column: `no-train` for the whole crop,
/// `no-train/<stream>` for a single split stream.
pub fn mode_label(mode: EvalMode, stream: Option<Stream>) -> String {
    match (mode, stream) {
        (EvalMode::NoTrain, Some(s)) if s != Stream::Full => format!("no-train/{}", s.as_str()),
        (m, _) => m.to_string(),
    }
}

pub fn run(args: &EvalArgs, defaults: &FileDefaults) -> Result<()> {
    let params: EvalParams = resolve(args, defaults.section("eval")?, "eval")?;
    if params.ranks.is_empty() || params.ranks.contains(&0) {
        bail!("ranks must be a non-empty list of positive integers");
    }
    if params.stream.is_some() && params.mode != EvalMode::NoTrain {
        bail!("--stream applies to no-train only; trained modes use their own input");
    }
    let data = DataDir::new(&args.data);
    let index = data.load_features_index()?;
    let splits = data.load_splits()?;
    let records = data.load_records()?;
    let Some(fold) = splits.folds.get(params.fold) else {
        bail!("fold {} does not exist ({} folds)", params.fold, splits.folds.len());
    };
    let by_id: HashMap<&str, _> = records.iter().map(|r| (r.record_id.as_str(), r)).collect();
    let test = select(&by_id, &fold.test)?;

    let mut upstream = vec![index.config_digest.clone()];
    let block;
    let embedder: &dyn Embedder = match params.mode {
        EvalMode::NoTrain => &RawEmbedder,
        EvalMode::Full | EvalMode::Concat => {
            let Some(path) = &args.model else {
                bail!("--model is required for mode {}", params.mode);
            };
            let p = read_model(path).with_context(|| format!("reading model {}", path.display()))?;
            let meta_file = meta_path(path);
            if meta_file.is_file() {
                let meta: ModelMeta = read_json(&meta_file)?;
                if meta.mode.as_str() != params.mode.to_string() {
                    bail!("{} was trained for {}, not {}", path.display(), meta.mode.as_str(), params.mode);
                }
                upstream.push(meta.config_digest);
            } else {
                log::warn!("{} has no metadata file; its digest is not chained", path.display());
            }
            block = ConvBlock::new(p);
            &block
        }
    };
    let digest = run_digest("eval", &params, &upstream);

    let load = |id: &str| -> Result<FeatureMap> {
        match params.mode {
            EvalMode::Concat => data.load_concat(id),
            EvalMode::Full => data.load_stream(id, Stream::Full),
            EvalMode::NoTrain => data.load_stream(id, params.stream.unwrap_or(Stream::Full)),
        }
    };
    let items = test
        .iter()
        .map(|r| {
            Ok(GalleryItem {
                record_id: r.record_id.clone(),
                instance_id: r.instance_id.clone(),
                scene_id: r.scene_id.clone(),
                map: load(&r.record_id)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gallery = build_gallery(items, embedder, params.mode)?;
    let outcomes = first_hit_ranks(&gallery, params.within_scene, |a, b| {
        distance(a, b).expect("gallery vectors share one length")
    });
    let mut report = MetricsReport::from_outcomes(params.mode, &outcomes, &params.ranks, gallery.len());
    report.seed = params.seed;
    report.config_digest = digest.clone();
    if report.excluded_probes > 0 {
        log::warn!("{} probes have no other view of their instance and were skipped", report.excluded_probes);
    }

    let label = mode_label(params.mode, params.stream);
    let out = args.out.clone().unwrap_or_else(|| data.root().join("metrics.csv"));
    let mut w = csv_writer(&out)?;
    w.write_record(["mode", "k", "accuracy", "probes", "gallery", "seed", "config_digest"])?;
    for (k, acc) in report.ks.iter().zip(&report.accuracies) {
        w.write_record([
            label.clone(),
            k.to_string(),
            acc.to_string(),
            report.probes.to_string(),
            report.gallery_size.to_string(),
            report.seed.to_string(),
            digest.clone(),
        ])?;
        log::info!("{label} rank-{k}: {:.2}%", acc * 100.0);
    }
    w.flush()?;

    if let Some(path) = &args.cmc {
        let curve = CmcCurve::from_outcomes(&outcomes, gallery.len());
        let mut w = csv_writer(path)?;
        w.write_record(["rank", "rate", "config_digest"])?;
        for (r, rate) in curve.ranks.iter().zip(&curve.rates) {
            w.write_record([r.to_string(), rate.to_string(), digest.clone()])?;
        }
        w.flush()?;
    }
    Ok(())
}
