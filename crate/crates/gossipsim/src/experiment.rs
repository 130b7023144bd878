//! Parallel drivers over the core experiments.
//!
//! Each trial or run is an isolated engine with its own derived seed, and
//! results are collected in index order, so outcomes do not depend on the
//! thread count.

use gossipsim_core::metrics::{self, LatencySummary};
use gossipsim_core::montecarlo::{self, Scratch, TrialOutcome, TrialParams, TrialStats};
use gossipsim_core::protocol::{Mode, ProtocolStats};
use gossipsim_core::rng::derive_seed;
use gossipsim_core::scenario::{self, ConflictOutcome, DisseminationOutcome};
use gossipsim_core::simnet::{LatencyModel, NetworkConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, ResolvedSimulation};

pub fn montecarlo(params: &TrialParams, trials: u64, seed: u64) -> (Vec<TrialOutcome>, TrialStats) {
    assert!(trials >= 1, "at least one trial");
    let outcomes: Vec<TrialOutcome> =
        (0..trials).into_par_iter().map_init(Scratch::default, |s, i| montecarlo::trial(params, seed, i, s)).collect();
    let stats = TrialStats::from_outcomes(params.n, &outcomes).expect("nonempty");
    (outcomes, stats)
}

/// Headline numbers of one dissemination run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mode: Mode,
    pub n: u32,
    pub blocks: u64,
    pub fully_delivered: bool,
    pub undelivered_cells: usize,
    pub latency: LatencyOverview,
    pub bandwidth: BandwidthOverview,
    /// Payload receipts by source: orderer, push, digest response, pull, recovery.
    pub receipts_by_source: [u64; 5],
    pub protocol: ProtocolStats,
    pub duration_ms: f64,
    pub events_executed: u64,
    pub messages_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyOverview {
    pub overall: metrics::Percentiles,
    pub overall_mean_ms: Option<f64>,
    pub max_block_latency_ms: Option<f64>,
    /// Median over blocks of the time to reach the block's last peer.
    pub median_block_completion_ms: Option<f64>,
    pub peer_extremes: Option<metrics::Extremes>,
    pub block_extremes: Option<metrics::Extremes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthOverview {
    pub total_bytes: u64,
    pub payload_bytes: u64,
    pub full_block_sends: u64,
    pub full_block_sends_per_block: f64,
    /// Mean over peers of bytes sent per second.
    pub mean_peer_sent_bytes_per_sec: f64,
    /// Real deployments add this much idle traffic per peer; it is outside
    /// the model and not included above.
    pub background_bytes_per_sec_not_modelled: f64,
}

pub fn simulate(run: &ResolvedSimulation) -> DisseminationOutcome {
    scenario::run_dissemination(&run.protocol, &run.network, &run.dissemination)
}

pub fn report(run: &ResolvedSimulation, out: &DisseminationOutcome, latency: &LatencySummary) -> SimulationReport {
    let blocks = out.trace.blocks().len() as u64;
    let mut completions: Vec<f64> = latency.blocks.iter().filter_map(|b| b.percentiles.p100).collect();
    completions.sort_by(f64::total_cmp);
    let n = run.protocol.n;
    let full = out.stats.full_block_sends();
    let secs = out.duration_ms / 1000.0;
    let sent: u64 = out.traffic.sent_totals().iter().sum();
    SimulationReport {
        mode: run.protocol.mode,
        n,
        blocks,
        fully_delivered: out.trace.fully_delivered(),
        undelivered_cells: latency.undelivered,
        latency: LatencyOverview {
            overall: latency.overall,
            overall_mean_ms: latency.overall_mean_ms,
            max_block_latency_ms: latency.max_block_latency_ms,
            median_block_completion_ms: (!completions.is_empty()).then(|| completions[completions.len() / 2]),
            peer_extremes: latency.peer_extremes.clone(),
            block_extremes: latency.block_extremes.clone(),
        },
        bandwidth: BandwidthOverview {
            total_bytes: out.traffic.total_bytes(),
            payload_bytes: out.traffic.total_payload_bytes(),
            full_block_sends: full,
            full_block_sends_per_block: if blocks == 0 { 0.0 } else { full as f64 / blocks as f64 },
            mean_peer_sent_bytes_per_sec: if secs > 0.0 { sent as f64 / f64::from(n) / secs } else { 0.0 },
            background_bytes_per_sec_not_modelled: metrics::IDLE_BACKGROUND_BYTES_PER_SEC,
        },
        receipts_by_source: out.trace.receipts_by_source(),
        protocol: out.stats.clone(),
        duration_ms: out.duration_ms,
        events_executed: out.summary.events_executed,
        messages_delivered: out.summary.messages_delivered,
    }
}

/// Network variants the conflict experiment can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Enhanced,
    /// Enhanced gossip over a zero-latency network with instant validation.
    Instant,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Enhanced => "enhanced",
            Variant::Instant => "instant",
        }
    }

    fn mode(self) -> Mode {
        match self {
            Variant::Baseline => Mode::Baseline,
            Variant::Enhanced | Variant::Instant => Mode::Enhanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRun {
    pub block_period_ms: f64,
    pub variant: Variant,
    pub run: u32,
    pub seed: u64,
    pub outcome: ConflictOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictCell {
    pub block_period_ms: f64,
    pub variant: Variant,
    pub txs_per_block_avg: f64,
    pub conflicts: f64,
    pub runs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRow {
    pub block_period_ms: f64,
    pub txs_per_block_avg: f64,
    pub validation_time_ms: f64,
    pub baseline: f64,
    pub enhanced: f64,
    /// `(enhanced − baseline) / baseline`, in percent.
    pub difference_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictTable {
    pub rows: Vec<ConflictRow>,
    pub cells: Vec<ConflictCell>,
    #[serde(skip)]
    pub runs: Vec<ConflictRun>,
}

/// Every `(period, variant, run)` cell. Run `r` uses the same seed in every
/// cell, so modes are compared on the same workload and endorser.
pub fn conflicts(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<ConflictTable, ConfigError> {
    let n = cfg.protocol.n.unwrap_or(100);
    cfg.workload.validate_conflicts(n)?;
    let network = cfg.network.resolve()?;
    let mut jobs = Vec::new();
    for &period in &cfg.workload.block_periods_ms {
        for &variant in variants {
            let protocol = cfg.protocol.resolve_for(variant.mode(), false)?;
            let mut params = cfg.workload.conflicts(period, n)?;
            let mut net = network;
            if variant == Variant::Instant {
                net.latency = LatencyModel::INSTANT;
                params.validation_ms_per_tx = 0.0;
            }
            for run in 0..cfg.workload.runs {
                let seed = derive_seed(network.seed, u64::from(run));
                jobs.push((period, variant, run, seed, protocol.clone(), NetworkConfig { seed, ..net }, params));
            }
        }
    }
    let runs: Vec<ConflictRun> = jobs
        .into_par_iter()
        .map(|(period, variant, run, seed, protocol, net, params)| {
            let outcome = scenario::run_conflicts(&protocol, &net, &params);
            if !outcome.completed {
                log::warn!("conflict run {run} ({}, {period} ms) did not drain", variant.label());
            }
            ConflictRun { block_period_ms: period, variant, run, seed, outcome }
        })
        .collect();
    Ok(tabulate(cfg, variants, runs))
}

fn tabulate(cfg: &ExperimentConfig, variants: &[Variant], runs: Vec<ConflictRun>) -> ConflictTable {
    let mut cells = Vec::new();
    for &period in &cfg.workload.block_periods_ms {
        for &variant in variants {
            let mine: Vec<&ConflictRun> =
                runs.iter().filter(|r| r.block_period_ms == period && r.variant == variant).collect();
            let k = mine.len() as f64;
            cells.push(ConflictCell {
                block_period_ms: period,
                variant,
                txs_per_block_avg: mine.iter().map(|r| r.outcome.txs_per_block_avg).sum::<f64>() / k,
                conflicts: mine.iter().map(|r| r.outcome.conflicts as f64).sum::<f64>() / k,
                runs: mine.iter().map(|r| r.outcome.conflicts).collect(),
            });
        }
    }
    let cell = |period: f64, v: Variant| cells.iter().find(|c| c.block_period_ms == period && c.variant == v);
    let rows = cfg
        .workload
        .block_periods_ms
        .iter()
        .filter_map(|&period| {
            let b = cell(period, Variant::Baseline)?;
            let e = cell(period, Variant::Enhanced)?;
            Some(ConflictRow {
                block_period_ms: period,
                txs_per_block_avg: b.txs_per_block_avg,
                validation_time_ms: b.txs_per_block_avg * cfg.workload.validation_ms_per_tx,
                baseline: b.conflicts,
                enhanced: e.conflicts,
                difference_pct: if b.conflicts > 0.0 { 100.0 * (e.conflicts - b.conflicts) / b.conflicts } else { 0.0 },
                instant: cell(period, Variant::Instant).map(|c| c.conflicts),
            })
        })
        .collect();
    ConflictTable { rows, cells, runs }
}
