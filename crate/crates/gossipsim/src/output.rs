//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gossipsim_core::metrics::{BandwidthSeries, DisseminationTrace};
use serde::Serialize;

use crate::experiment::ConflictRun;

pub const LATENCY_CSV: &str = "latency.csv";
pub const BANDWIDTH_CSV: &str = "bandwidth.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CONFLICTS_JSON: &str = "conflicts.json";
pub const CONFLICT_RUNS_CSV: &str = "conflict_runs.csv";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One row per delivered `(block, peer)` cell.
pub fn write_latency_csv<W: Write>(w: W, trace: &DisseminationTrace) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["block_seq", "peer_id", "latency_ms"])?;
    for (seq, peer, ms) in trace.latency_rows() {
        csv.write_record([seq.to_string(), peer.to_string(), ms.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// One row per `(peer, bucket)`.
pub fn write_bandwidth_csv<W: Write>(w: W, series: &BandwidthSeries) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["peer_id", "bucket_start_ms", "bytes_sent", "bytes_received", "payload_bytes_sent"])?;
    for peer in &series.peers {
        for b in &peer.buckets {
            csv.write_record([
                peer.peer.to_string(),
                b.start_ms.to_string(),
                b.bytes_sent.to_string(),
                b.bytes_received.to_string(),
                b.payload_bytes_sent.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn write_conflict_runs_csv<W: Write>(w: W, runs: &[ConflictRun]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "block_period_ms",
        "variant",
        "run",
        "seed",
        "endorser",
        "conflicts",
        "valid",
        "blocks",
        "txs_per_block_avg",
        "converged",
    ])?;
    for r in runs {
        let o = &r.outcome;
        csv.write_record([
            r.block_period_ms.to_string(),
            r.variant.label().to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            o.endorser.to_string(),
            o.conflicts.to_string(),
            o.valid.to_string(),
            o.blocks.to_string(),
            o.txs_per_block_avg.to_string(),
            o.converged.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn to_file<F>(dir: &Path, name: &str, write: F) -> Result<PathBuf>
where
    F: FnOnce(BufWriter<File>) -> Result<()>,
{
    let path = dir.join(name);
    write(create(&path)?)?;
    Ok(path)
}
