use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use reobj_core::dataset::crop_resize_split;
use reobj_core::encoding::{read_tensor, toy_extract, write_tensor, ExtractorConfig, ExtractorKind, FeatureMap, TOY_CHANNELS};
use reobj_core::Raster;
use serde::{Deserialize, Serialize};

use crate::cmd::ingest::{ingest, IngestParams};
use crate::config::{resolve, run_digest, FileDefaults};
use crate::layout::{feature_file, write_json, DataDir, FeaturesIndex, Stream};

/// Compute or import per-stream feature maps for every ingested record.
#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    pub extractor: Option<ExtractorKind>,
    /// Cells per side of the feature grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Channels per stream. The toy extractor always produces 8; imported
    /// files are checked against this when given.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Directory with `<record_id>.<stream>.rten` files to import
    /// (default: the ingested manifest's directory).
    #[arg(long)]
    #[serde(skip)]
    pub from: Option<PathBuf>,
    /// Also write the fg/bg/full crops as PNG under `<data>/crops`.
    #[arg(long)]
    #[serde(skip)]
    pub save_crops: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesParams {
    pub extractor: ExtractorKind,
    pub grid: usize,
    pub channels: Option<usize>,
    pub seed: u64,
}

impl Default for FeaturesParams {
    fn default() -> Self {
        Self {
            extractor: ExtractorKind::Toy,
            grid: 7,
            channels: None,
            seed: 0,
        }
    }
}

pub fn run(args: &FeaturesArgs, defaults: &FileDefaults) -> Result<()> {
    let params: FeaturesParams = resolve(args, defaults.section("features")?, "features")?;
    let data = DataDir::new(&args.data);
    if !data.is_ingested() {
        if !data.manifest().is_file() {
            bail!(
                "{} holds neither ingested records nor a manifest.jsonl",
                data.root().display()
            );
        }
        log::info!("no ingested records in {}; ingesting manifest.jsonl", data.root().display());
        let ingest_params: IngestParams = resolve(&(), defaults.section("ingest")?, "ingest")?;
        ingest(&data.manifest(), data.root(), &ingest_params, &data)?;
    }
    let index = match params.extractor {
        ExtractorKind::Toy => extract_toy(&data, &params, args.save_crops)?,
        ExtractorKind::Imported => import(&data, &params, args.from.clone())?,
    };
    write_json(&data.features_index(), &index)?;
    log::info!("wrote features for {} records, shape {:?}", index.count, index.shape);
    Ok(())
}

fn extract_toy(data: &DataDir, params: &FeaturesParams, save_crops: bool) -> Result<FeaturesIndex> {
    if let Some(c) = params.channels {
        if c != TOY_CHANNELS {
            bail!("the toy extractor produces {TOY_CHANNELS} channels per stream, not {c}");
        }
    }
    let cfg = ExtractorConfig {
        kind: ExtractorKind::Toy,
        grid: params.grid,
        channels_per_stream: TOY_CHANNELS,
    };
    cfg.validate()?;
    let ingest = data.load_ingest()?;
    let digest = run_digest("features", params, std::slice::from_ref(&ingest.config_digest));
    let records = data.load_records()?;
    std::fs::create_dir_all(data.features_dir())?;
    let crops_dir = data.root().join("crops");
    if save_crops {
        std::fs::create_dir_all(&crops_dir)?;
    }

    let mut cached: Option<(PathBuf, Raster)> = None;
    for rec in &records {
        let path = ingest.images_dir.join(&rec.image_path);
        if cached.as_ref().map(|(p, _)| p != &path).unwrap_or(true) {
            let img = Raster::load(&path).with_context(|| format!("loading image {}", path.display()))?;
            cached = Some((path, img));
        }
        let img = &cached.as_ref().expect("image loaded above").1;
        let crop = crop_resize_split(img, rec, ingest.params.border, ingest.params.size)
            .with_context(|| format!("cropping {}", rec.record_id))?;
        for (stream, raster) in [(Stream::Fg, &crop.fg), (Stream::Bg, &crop.bg), (Stream::Full, &crop.full)] {
            let map = toy_extract(raster, &cfg).with_context(|| format!("extracting {}", rec.record_id))?;
            write_tensor(data.feature(&rec.record_id, stream), &map)?;
            if save_crops {
                raster.save_png(crops_dir.join(format!("{}.{}.png", rec.record_id, stream.as_str())))?;
            }
        }
    }
    Ok(FeaturesIndex {
        config_digest: digest,
        extractor: cfg,
        shape: (params.grid, params.grid, TOY_CHANNELS),
        count: records.len(),
    })
}

fn import(data: &DataDir, params: &FeaturesParams, from: Option<PathBuf>) -> Result<FeaturesIndex> {
    let ingest = data.load_ingest()?;
    let digest = run_digest("features", params, std::slice::from_ref(&ingest.config_digest));
    let src = from.unwrap_or_else(|| ingest.manifest_dir.clone());
    let records = data.load_records()?;
    std::fs::create_dir_all(data.features_dir())?;
    let same_dir = src.canonicalize().ok() == data.features_dir().canonicalize().ok();

    let mut shape: Option<(usize, usize, usize)> = None;
    for rec in &records {
        for stream in Stream::ALL {
            let path = feature_file(&src, &rec.record_id, stream);
            let map: FeatureMap = read_tensor(&path).with_context(|| format!("importing {}", path.display()))?;
            let (h, w, c) = map.shape();
            if h != params.grid || w != params.grid {
                bail!("{} is {h}x{w}, expected {g}x{g}", path.display(), g = params.grid);
            }
            if let Some(want) = params.channels {
                if c != want {
                    bail!("{} has {c} channels, expected {want}", path.display());
                }
            }
            match shape {
                None => shape = Some((h, w, c)),
                Some(s) if s != (h, w, c) => {
                    bail!("{} has shape {:?}, earlier files have {s:?}", path.display(), (h, w, c))
                }
                Some(_) => {}
            }
            if !same_dir {
                write_tensor(data.feature(&rec.record_id, stream), &map)?;
            }
        }
    }
    let shape = shape.context("no records to import features for")?;
    Ok(FeaturesIndex {
        config_digest: digest,
        extractor: ExtractorConfig {
            kind: ExtractorKind::Imported,
            grid: params.grid,
            channels_per_stream: shape.2,
        },
        shape,
        count: records.len(),
    })
}
