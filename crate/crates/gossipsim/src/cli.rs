//! Command-line interface.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration error,
//! 3 some block was not delivered to every peer.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gossipsim_core::analysis::{self, Kernel, PushParams, TtlRequest};
use gossipsim_core::metrics::{bandwidth_series, latency_cdfs};
use gossipsim_core::montecarlo::TrialParams;
use gossipsim_core::protocol::Mode;
use serde::Serialize;

use crate::config::{self, ConfigError, ExperimentConfig, Format, Overrides, RESOLVED_CONFIG_FILE};
use crate::experiment::{self, Variant};
use crate::output;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_UNDELIVERED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gossipsim", version, about = "Gossip block dissemination simulator and TTL analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal TTL for a failure target, with the supporting analysis.
    Ttl(TtlArgs),
    /// Connectivity-only push trials.
    Montecarlo(MonteCarloArgs),
    /// Timed dissemination of a block stream.
    Simulate(SimulateArgs),
    /// Validation-time conflicts under both gossip modes.
    Conflicts(ConflictsArgs),
}

#[derive(Debug, Args)]
pub struct TtlArgs {
    #[arg(long, default_value_t = 100)]
    pub n: u32,
    /// Fan-out; defaults to ⌊ln n⌋ (at least 2).
    #[arg(long)]
    pub fout: Option<u32>,
    #[arg(long, default_value_t = config::DEFAULT_P_E_TARGET)]
    pub pe: f64,
    /// exponential (default) or binomial.
    #[arg(long, default_value = "exponential", value_parser = parse_kernel)]
    pub kernel: Kernel,
    /// Build a lookup table for these network sizes instead.
    #[arg(long, value_delimiter = ',')]
    pub table: Option<Vec<u32>>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed (network.seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// baseline or enhanced.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Number of peers.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub fout: Option<u32>,
    /// Enhanced only; replaces the p_e target.
    #[arg(long)]
    pub ttl: Option<u32>,
    /// Enhanced only; counters up to this value carry full blocks.
    #[arg(long)]
    pub ttl_direct: Option<u32>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub blocks: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConflictsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Runs per (period, mode) cell.
    #[arg(long)]
    pub runs: Option<u32>,
    /// Block periods in milliseconds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub periods: Option<Vec<f64>>,
    /// Add the zero-latency, instant-validation ablation.
    #[arg(long)]
    pub instant: bool,
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    config::parse_kernel(s).map_err(|e| e.0)
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "baseline" => Ok(Mode::Baseline),
        "enhanced" => Ok(Mode::Enhanced),
        other => Err(format!("unknown mode {other:?} (expected baseline or enhanced)")),
    }
}

impl CommonArgs {
    fn overrides(&self, p: Option<&ProtocolArgs>) -> Overrides {
        Overrides {
            mode: p.and_then(|p| p.mode),
            seed: self.seed,
            out: self.out.clone(),
            n: p.and_then(|p| p.n),
            f_out: p.and_then(|p| p.fout),
            ttl: p.and_then(|p| p.ttl),
            ttl_direct: p.and_then(|p| p.ttl_direct),
            ..Overrides::default()
        }
    }
}

/// Run a parsed command line, mapping failures to exit codes.
pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ttl(a) => cmd_ttl(&a),
        Command::Montecarlo(a) => cmd_montecarlo(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Conflicts(a) => cmd_conflicts(&a),
    }
}

fn analysis_err(e: analysis::AnalysisError) -> ConfigError {
    ConfigError(e.to_string())
}

#[derive(Serialize)]
struct TtlReport {
    n: u32,
    f_out: u32,
    p_e_target: f64,
    kernel: Kernel,
    ttl: u32,
    gamma: f64,
    psi: Vec<f64>,
    expected_digests: f64,
    digests_lower_bound: f64,
    p_e_bound: f64,
}

fn cmd_ttl(a: &TtlArgs) -> Result<ExitCode> {
    let json = if let Some(ns) = &a.table {
        let requests: Vec<TtlRequest> = ns
            .iter()
            .map(|&n| TtlRequest {
                n,
                p_e_target: a.pe,
                f_out: a.fout.unwrap_or_else(|| config::default_enhanced_fanout(n)),
            })
            .collect();
        let table = analysis::build_ttl_table(&requests).map_err(analysis_err)?;
        if !a.json {
            println!("{:>8} {:>6} {:>10} {:>5}", "n", "f_out", "p_e", "ttl");
            for e in table.entries() {
                println!("{:>8} {:>6} {:>10.1e} {:>5}", e.n, e.f_out, e.p_e_target, e.ttl);
            }
        }
        serde_json::to_string_pretty(&table)?
    } else {
        let f_out = a.fout.unwrap_or_else(|| config::default_enhanced_fanout(a.n));
        let ttl = analysis::min_ttl_with_kernel(a.n, f_out, a.pe, a.kernel).map_err(analysis_err)?;
        let params = PushParams::new(a.n, f_out, ttl).map_err(analysis_err)?.with_kernel(a.kernel);
        let r = analysis::analyze(&params).map_err(analysis_err)?;
        let report = TtlReport {
            n: a.n,
            f_out,
            p_e_target: a.pe,
            kernel: a.kernel,
            ttl,
            gamma: r.gamma,
            psi: r.psi_trajectory,
            expected_digests: r.expected_digests,
            digests_lower_bound: r.digests_lower_bound,
            p_e_bound: r.p_e_bound,
        };
        if !a.json {
            println!("n = {}, f_out = {}, p_e target = {:e}, kernel = {:?}", a.n, f_out, a.pe, a.kernel);
            println!("minimal ttl        {}", report.ttl);
            println!("carrying capacity  {:.4}", report.gamma);
            let psi: Vec<String> = report.psi.iter().map(|v| format!("{v:.2}")).collect();
            println!("psi(0..=ttl)       {}", psi.join(" "));
            println!(
                "expected digests   {:.1} (lower bound {:.1})",
                report.expected_digests, report.digests_lower_bound
            );
            println!("p_e bound          {:.3e}", report.p_e_bound);
        }
        serde_json::to_string_pretty(&report)?
    };
    if a.json {
        println!("{json}");
    }
    if let Some(path) = &a.out {
        std::fs::write(path, format!("{json}\n")).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct MonteCarloReport<'a> {
    params: &'a TrialParams,
    seed: u64,
    stats: &'a gossipsim_core::montecarlo::TrialStats,
}

fn cmd_montecarlo(a: &MonteCarloArgs) -> Result<ExitCode> {
    if a.trials < 1 {
        return Err(ConfigError("--trials must be at least 1".into()).into());
    }
    let cfg = ExperimentConfig::assemble(a.common.config.as_deref(), &a.common.overrides(Some(&a.protocol)))?;
    let protocol = cfg.protocol.resolve()?;
    let params = TrialParams::from_config(&protocol);
    let seed = cfg.network.seed;
    let (_, stats) = experiment::montecarlo(&params, a.trials, seed);
    println!(
        "{} n={} f_out={}{} trials={}",
        params.mode,
        params.n,
        params.f_out,
        if params.mode == Mode::Enhanced {
            format!(" ttl={} ttl_direct={}", params.ttl, params.ttl_direct)
        } else {
            String::new()
        },
        stats.trials
    );
    println!(
        "informed      mean {:.3}  std {:.3}  min {}  max {}",
        stats.informed_mean, stats.informed_std, stats.informed_min, stats.informed_max
    );
    println!("full blocks   mean {:.2}", stats.transmissions_mean);
    if params.mode == Mode::Enhanced {
        println!("digests       mean {:.2}  requests {:.2}", stats.digests_mean, stats.digest_requests_mean);
    }
    println!("failed        {}", stats.failed);
    if let Some(dir) = &a.common.out {
        output::ensure_dir(dir)?;
        output::write_json(&dir.join("montecarlo.json"), &MonteCarloReport { params: &params, seed, stats: &stats })?;
        output::write_json(&dir.join(RESOLVED_CONFIG_FILE), &cfg.resolved(&protocol))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<ExitCode> {
    let mut o = a.common.overrides(Some(&a.protocol));
    o.blocks = a.blocks;
    let cfg = ExperimentConfig::assemble(a.common.config.as_deref(), &o)?;
    let run = cfg.resolve_simulation()?;
    let dir = cfg.output.dir.clone();
    output::ensure_dir(&dir)?;
    output::write_json(&dir.join(RESOLVED_CONFIG_FILE), &cfg.resolved(&run.protocol))?;

    log::info!("simulating {} blocks in {} mode", run.dissemination.blocks, run.protocol.mode);
    let out = experiment::simulate(&run);
    let latency = latency_cdfs(&out.trace);
    let report = experiment::report(&run, &out, &latency);
    if cfg.output.wants(Format::Csv) {
        output::to_file(&dir, output::LATENCY_CSV, |w| output::write_latency_csv(w, &out.trace))?;
        let series = bandwidth_series(&out.traffic, cfg.output.bucket_ms, out.duration_ms);
        output::to_file(&dir, output::BANDWIDTH_CSV, |w| output::write_bandwidth_csv(w, &series))?;
    }
    if cfg.output.wants(Format::Json) {
        output::write_json(&dir.join(output::SUMMARY_JSON), &report)?;
    }

    let ms = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}"));
    let p = &report.latency.overall;
    println!("{} n={} blocks={} delivered={}", report.mode, report.n, report.blocks, report.fully_delivered);
    println!(
        "latency ms    p50 {}  p95 {}  p99 {}  max {}",
        ms(p.p50),
        ms(p.p95),
        ms(p.p99),
        ms(report.latency.max_block_latency_ms)
    );
    println!(
        "full blocks   {:.1} per block, payload {} bytes, total {} bytes",
        report.bandwidth.full_block_sends_per_block, report.bandwidth.payload_bytes, report.bandwidth.total_bytes
    );
    println!("outputs in {}", dir.display());

    if !report.fully_delivered {
        let missing = out.trace.undelivered();
        let mut err = io::stderr().lock();
        writeln!(err, "undelivered (block, peer) cells: {}", missing.len())?;
        for (seq, peer) in missing.iter().take(20) {
            writeln!(err, "  block {seq} peer {peer}")?;
        }
        return Ok(ExitCode::from(EXIT_UNDELIVERED));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_conflicts(a: &ConflictsArgs) -> Result<ExitCode> {
    let mut o = a.common.overrides(None);
    o.runs = a.runs;
    o.block_periods_ms = a.periods.clone();
    let cfg = ExperimentConfig::assemble(a.common.config.as_deref(), &o)?;
    if cfg.protocol.mode.is_some() {
        return Err(ConfigError("conflicts runs both modes; remove protocol.mode".into()).into());
    }
    cfg.output.validate()?;
    let mut variants = vec![Variant::Baseline, Variant::Enhanced];
    if a.instant {
        variants.push(Variant::Instant);
    }
    let table = experiment::conflicts(&cfg, &variants)?;

    println!(
        "{:>8} {:>9} {:>11} {:>9} {:>9} {:>8}{}",
        "period",
        "tx/block",
        "validation",
        "baseline",
        "enhanced",
        "diff",
        if a.instant { format!(" {:>8}", "instant") } else { String::new() }
    );
    for r in &table.rows {
        println!(
            "{:>7.2}s {:>9.2} {:>10.2}s {:>9.1} {:>9.1} {:>7.0}%{}",
            r.block_period_ms / 1000.0,
            r.txs_per_block_avg,
            r.validation_time_ms / 1000.0,
            r.baseline,
            r.enhanced,
            r.difference_pct,
            r.instant.map_or(String::new(), |v| format!(" {v:>8.1}"))
        );
    }

    let dir = cfg.output.dir.clone();
    output::ensure_dir(&dir)?;
    // the protocol section drives both modes, so it is kept as given
    output::write_json(&dir.join(RESOLVED_CONFIG_FILE), &cfg)?;
    if cfg.output.wants(Format::Json) {
        output::write_json(&dir.join(output::CONFLICTS_JSON), &table)?;
    }
    if cfg.output.wants(Format::Csv) {
        output::to_file(&dir, output::CONFLICT_RUNS_CSV, |w| output::write_conflict_runs_csv(w, &table.runs))?;
    }
    Ok(ExitCode::SUCCESS)
}
