use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::cmd::csv_writer;
use crate::config::{resolve, run_digest, FileDefaults};

/// Side-by-side comparison of metrics files plus CMC points for plotting.
#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Metrics CSVs written by `reobj eval`, one column each.
    #[arg(required = true)]
    #[serde(skip)]
    pub metrics: Vec<PathBuf>,
    /// CMC CSVs written by `reobj eval --cmc`.
    #[arg(long, num_args = 1..)]
    #[serde(skip)]
    pub cmc: Vec<PathBuf>,
    /// Directory for report.csv, report.txt and cmc_points.csv.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportParams {
    pub seed: u64,
}

/// One metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsColumn {
    pub label: String,
    pub ranks: Vec<usize>,
    pub accuracies: Vec<f64>,
    pub digest: String,
}

#[derive(Debug, Deserialize)]
struct MetricsRow {
    mode: String,
    k: usize,
    accuracy: f64,
    #[serde(default)]
    config_digest: String,
}

#[derive(Debug, Deserialize)]
struct CmcRow {
    rank: usize,
    rate: f64,
    #[serde(default)]
    config_digest: String,
}

pub fn read_metrics(path: &Path) -> Result<MetricsColumn> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut col: Option<MetricsColumn> = None;
    for row in rdr.deserialize::<MetricsRow>() {
        let row = row.with_context(|| format!("parsing {}", path.display()))?;
        let c = col.get_or_insert_with(|| MetricsColumn {
            label: row.mode.clone(),
            ranks: Vec::new(),
            accuracies: Vec::new(),
            digest: row.config_digest.clone(),
        });
        if c.label != row.mode {
            bail!("{} mixes modes {} and {}", path.display(), c.label, row.mode);
        }
        c.ranks.push(row.k);
        c.accuracies.push(row.accuracy);
    }
    col.with_context(|| format!("{} has no rows", path.display()))
}

/// Checks that every file reports the same ranks and makes labels unique.
pub fn align(mut cols: Vec<(PathBuf, MetricsColumn)>) -> Result<Vec<MetricsColumn>> {
    let first = cols[0].1.ranks.clone();
    if cols.iter().any(|(_, c)| c.ranks != first) {
        let mut msg = String::from("metrics files report different rank sets:");
        for (p, c) in &cols {
            write!(msg, "\n  {}: {:?}", p.display(), c.ranks).unwrap();
        }
        bail!(msg);
    }
    let labels: Vec<String> = cols.iter().map(|(_, c)| c.label.clone()).collect();
    for (path, col) in &mut cols {
        if labels.iter().filter(|l| **l == col.label).count() > 1 {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            col.label = format!("{} ({stem})", col.label);
        }
    }
    Ok(cols.into_iter().map(|(_, c)| c).collect())
}

/// Ranks down, modes across, accuracies in percent with two decimals.
pub fn text_table(cols: &[MetricsColumn]) -> String {
    let widths: Vec<usize> = cols.iter().map(|c| c.label.len().max(7)).collect();
    let mut out = format!("{:<8}", "rank");
    for (c, w) in cols.iter().zip(&widths) {
        write!(out, "  {:>w$}", c.label, w = w).unwrap();
    }
    out.push('\n');
    for (i, k) in cols[0].ranks.iter().enumerate() {
        write!(out, "{:<8}", format!("rank-{k}")).unwrap();
        for (c, w) in cols.iter().zip(&widths) {
            write!(out, "  {:>w$.2}", c.accuracies[i] * 100.0, w = w).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn run(args: &ReportArgs, defaults: &FileDefaults) -> Result<()> {
    let params: ReportParams = resolve(args, defaults.section("report")?, "report")?;
    let cols = args
        .metrics
        .iter()
        .map(|p| Ok((p.clone(), read_metrics(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let cols = align(cols)?;
    let upstream: Vec<String> = cols.iter().map(|c| c.digest.clone()).collect();
    let digest = run_digest("report", &params, &upstream);
    let table = text_table(&cols);
    print!("{table}");

    let Some(dir) = &args.out else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.txt"), format!("{table}config_digest: {digest}\n"))?;

    let mut w = csv_writer(&dir.join("report.csv"))?;
    let mut header = vec!["rank".to_string()];
    header.extend(cols.iter().map(|c| c.label.clone()));
    header.push("config_digest".into());
    w.write_record(&header)?;
    for (i, k) in cols[0].ranks.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(cols.iter().map(|c| c.accuracies[i].to_string()));
        row.push(digest.clone());
        w.write_record(&row)?;
    }
    w.flush()?;

    if !args.cmc.is_empty() {
        let mut w = csv_writer(&dir.join("cmc_points.csv"))?;
        w.write_record(["series", "rank", "rate", "config_digest"])?;
        for path in &args.cmc {
            let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
            let rows = rdr
                .deserialize::<CmcRow>()
                .collect::<std::result::Result<Vec<_>, _>>()
                .with_context(|| format!("parsing {}", path.display()))?;
            // a curve written by the same eval run as a metrics file takes its label
            let series = rows
                .first()
                .and_then(|r| cols.iter().find(|c| !c.digest.is_empty() && c.digest == r.config_digest))
                .map(|c| c.label.clone())
                .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            for r in rows {
                w.write_record([series.clone(), r.rank.to_string(), r.rate.to_string(), digest.clone()])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(label: &str, ranks: &[usize], acc: &[f64]) -> MetricsColumn {
        MetricsColumn {
            label: label.into(),
            ranks: ranks.to_vec(),
            accuracies: acc.to_vec(),
            digest: String::new(),
        }
    }

    #[test]
    fn percent_with_two_decimals() {
        let t = text_table(&[col("concat", &[1], &[0.7785])]);
        assert!(t.contains("77.85"), "{t}");
    }

    #[test]
    fn mismatched_ranks_list_every_file() {
        let err = align(vec![
            ("a.csv".into(), col("full", &[1, 5], &[0.1, 0.2])),
            ("b.csv".into(), col("concat", &[1], &[0.1])),
        ])
        .unwrap_err()
        .to_string();
        assert!(err.contains("a.csv") && err.contains("b.csv"), "{err}");
    }

    #[test]
    fn duplicate_labels_get_file_stems() {
        let cols = align(vec![
            ("runs/x.csv".into(), col("full", &[1], &[0.1])),
            ("runs/y.csv".into(), col("full", &[1], &[0.2])),
        ])
        .unwrap();
        assert_eq!(cols[0].label, "full (x)");
        assert_eq!(cols[1].label, "full (y)");
    }
}
