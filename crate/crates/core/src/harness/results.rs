use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::episode::{MethodKind, TraceStep};
use super::sweep::{EpisodeRecord, SweepRow};
use super::HarnessError;

/// Orders records by method, parameter, then seed.
pub fn sort_records(records: &mut [EpisodeRecord]) {
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.param.total_cmp(&b.param))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Path of the aggregate file written next to `path`: `runs.csv` becomes
/// `runs.agg.csv`.
pub fn aggregate_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.agg.csv"))
}

/// Writes per-episode rows in canonical order.
pub fn write_records<W: Write>(out: W, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["method", "param", "seed", "score", "n_queries", "n_repetitive", "steps"])?;
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per (method, parameter), aggregated from `records`.
pub fn write_aggregate<W: Write>(out: W, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "method",
        "param",
        "episodes",
        "mean_score",
        "se_score",
        "mean_queries",
        "se_queries",
        "mean_repetitive",
    ])?;
    for row in aggregate(records) {
        w.serialize(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Groups records by (method, parameter) in canonical order.
pub fn aggregate(records: &[EpisodeRecord]) -> Vec<SweepRow> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    sorted
        .chunk_by(|a, b| a.method == b.method && a.param.to_bits() == b.param.to_bits())
        .map(|g| SweepRow::aggregate(g[0].method, g[0].param, g))
        .collect()
}

/// Writes `path` with per-episode rows and its aggregate sibling.
pub fn write_results(path: &Path, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    write_records(BufWriter::new(File::create(path)?), records)?;
    write_aggregate(BufWriter::new(File::create(aggregate_path(path))?), records)?;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    method: MethodKind,
    param: f64,
    seed: u64,
    steps: &'a [TraceStep],
}

/// One JSON object per episode and line.
pub fn write_traces<W: Write>(
    mut out: W,
    traces: &[(EpisodeRecord, Vec<TraceStep>)],
) -> Result<(), HarnessError> {
    for (rec, steps) in traces {
        let line = TraceLine {
            method: rec.method,
            param: rec.param,
            seed: rec.seed,
            steps,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
