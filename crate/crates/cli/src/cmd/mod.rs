pub mod eval;
pub mod features;
pub mod ingest;
pub mod report;
pub mod synth;
pub mod train;

/// Shared CSV writer setup: the digest goes in its own column on every row.
pub(crate) fn csv_writer(path: &std::path::Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    use anyhow::Context;
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}
