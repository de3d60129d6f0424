use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use reobj_core::eval::{synth_benchmark, Appearance, SynthConfig};
use serde::Serialize;

use crate::config::{resolve, run_digest, FileDefaults};
use crate::layout::write_json;

/// Render the synthetic benchmark as a manifest plus images.
#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub views: Option<usize>,
    /// Foreground appearance across instances.
    #[arg(long)]
    pub fg: Option<Appearance>,
    /// Background appearance across instances.
    #[arg(long)]
    pub bg: Option<Appearance>,
    /// Standard deviation of the additive pixel noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SynthMeta<'a> {
    config_digest: &'a str,
    config: &'a SynthConfig,
    views: usize,
}

pub fn run(args: &SynthArgs, defaults: &FileDefaults) -> Result<()> {
    let cfg: SynthConfig = resolve(args, defaults.section("synth")?, "synth")?;
    let digest = run_digest("synth", &cfg, &[]);
    let data = synth_benchmark(&cfg)?;
    data.write_to(&args.out)
        .with_context(|| format!("writing benchmark to {}", args.out.display()))?;
    write_json(
        &args.out.join("synth.json"),
        &SynthMeta {
            config_digest: &digest,
            config: &cfg,
            views: data.records.len(),
        },
    )?;
    log::info!("wrote {} views to {}", data.records.len(), args.out.display());
    Ok(())
}
