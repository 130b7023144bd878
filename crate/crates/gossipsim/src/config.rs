//! Experiment configuration: one JSON document with `protocol`, `network`,
//! `workload` and `output` sections.
//!
//! Precedence, lowest first: built-in defaults, the config file, command-line
//! flags. Protocol fields that do not apply to the chosen mode are rejected
//! rather than ignored. Every run writes the resolved configuration next to
//! its outputs; feeding that file back reproduces the run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use gossipsim_core::analysis::{self, Kernel};
use gossipsim_core::ledger::WorkloadParams;
use gossipsim_core::protocol::{Mode, ProtocolConfig};
use gossipsim_core::scenario::{ConflictParams, DisseminationParams};
use gossipsim_core::simnet::{LatencyModel, NetworkConfig, PeerId};
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const DEFAULT_P_E_TARGET: f64 = 1e-6;
pub const DEFAULT_TTL_DIRECT: u32 = 2;

/// A configuration problem; the CLI maps it to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolSection,
    pub network: NetworkSection,
    pub workload: WorkloadSection,
    pub output: OutputSection,
}

/// Every field is optional; unset fields take the mode's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_out: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_push_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_recovery_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub push_buffer_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata_interval_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata_fanout: Option<u32>,
    // baseline only
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_in: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_pull_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pull_window: Option<usize>,
    // enhanced only
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_out_leader: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttl: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttl_direct: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_e_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest_bytes: Option<u32>,
}

impl ProtocolSection {
    fn baseline_only(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        self.f_in.is_some().then(|| v.push("f_in"));
        self.t_pull_ms.is_some().then(|| v.push("t_pull_ms"));
        self.pull_window.is_some().then(|| v.push("pull_window"));
        v
    }

    fn enhanced_only(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        self.f_out_leader.is_some().then(|| v.push("f_out_leader"));
        self.ttl.is_some().then(|| v.push("ttl"));
        self.ttl_direct.is_some().then(|| v.push("ttl_direct"));
        self.p_e_target.is_some().then(|| v.push("p_e_target"));
        self.digest_bytes.is_some().then(|| v.push("digest_bytes"));
        v
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or_default()
    }

    /// Resolve for the section's own mode, rejecting fields of the other mode.
    pub fn resolve(&self) -> Result<ProtocolConfig, ConfigError> {
        self.resolve_for(self.mode(), true)
    }

    /// Resolve for `mode`. With `strict`, fields belonging to the other mode
    /// are an error; otherwise they are skipped (used when one file drives
    /// both modes, as the conflict experiment does).
    pub fn resolve_for(&self, mode: Mode, strict: bool) -> Result<ProtocolConfig, ConfigError> {
        let foreign = match mode {
            Mode::Baseline => self.enhanced_only(),
            Mode::Enhanced => self.baseline_only(),
        };
        if strict && !foreign.is_empty() {
            return bad(format!("{} not valid in {mode} mode", foreign.join(", ")));
        }
        let n = self.n.unwrap_or(100);
        if n < 2 {
            return bad("protocol.n must be at least 2");
        }
        let mut cfg = match mode {
            Mode::Baseline => {
                let mut c = ProtocolConfig::baseline(n);
                set(&mut c.f_in, self.f_in);
                set(&mut c.t_pull_ms, self.t_pull_ms);
                set(&mut c.pull_window, self.pull_window);
                c
            }
            Mode::Enhanced => {
                let f_out = self.f_out.unwrap_or_else(|| default_enhanced_fanout(n));
                let ttl = match (self.ttl, self.p_e_target) {
                    (Some(_), Some(_)) => return bad("give protocol.ttl or protocol.p_e_target, not both"),
                    (Some(t), None) => t,
                    (None, target) => {
                        let target = target.unwrap_or(DEFAULT_P_E_TARGET);
                        analysis::min_ttl(n, f_out, target)
                            .map_err(|e| ConfigError(format!("cannot derive ttl: {e}")))?
                    }
                };
                let ttl_direct = self.ttl_direct.unwrap_or(DEFAULT_TTL_DIRECT.min(ttl));
                let mut c = ProtocolConfig::enhanced(n, f_out, ttl, ttl_direct);
                set(&mut c.f_out_leader, self.f_out_leader);
                set(&mut c.digest_bytes, self.digest_bytes);
                c
            }
        };
        set(&mut cfg.f_out, self.f_out);
        set(&mut cfg.t_push_ms, self.t_push_ms);
        set(&mut cfg.t_recovery_ms, self.t_recovery_ms);
        set(&mut cfg.push_buffer_capacity, self.push_buffer_capacity);
        set(&mut cfg.recovery, self.recovery);
        set(&mut cfg.metadata_interval_ms, self.metadata_interval_ms);
        set(&mut cfg.metadata_fanout, self.metadata_fanout);
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    /// The explicit section for a resolved config: every field that applies
    /// to its mode, nothing else.
    pub fn from_resolved(c: &ProtocolConfig) -> Self {
        let common = Self {
            mode: Some(c.mode),
            n: Some(c.n),
            f_out: Some(c.f_out),
            t_push_ms: Some(c.t_push_ms),
            t_recovery_ms: Some(c.t_recovery_ms),
            push_buffer_capacity: Some(c.push_buffer_capacity),
            recovery: Some(c.recovery),
            metadata_interval_ms: Some(c.metadata_interval_ms),
            metadata_fanout: Some(c.metadata_fanout),
            ..Self::default()
        };
        match c.mode {
            Mode::Baseline => {
                Self { f_in: Some(c.f_in), t_pull_ms: Some(c.t_pull_ms), pull_window: Some(c.pull_window), ..common }
            }
            Mode::Enhanced => Self {
                f_out_leader: Some(c.f_out_leader),
                ttl: Some(c.ttl),
                ttl_direct: Some(c.ttl_direct),
                digest_bytes: Some(c.digest_bytes),
                ..common
            },
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// `⌊ln n⌋`, at least 2.
pub fn default_enhanced_fanout(n: u32) -> u32 {
    (f64::from(n).ln().floor() as u32).max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub latency: LatencyModel,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let d = NetworkConfig::default();
        Self { latency: d.latency, drop_probability: d.drop_probability, seed: d.seed }
    }
}

impl NetworkSection {
    pub fn resolve(&self) -> Result<NetworkConfig, ConfigError> {
        if !self.latency.is_valid() {
            return bad("network.latency values must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return bad("network.drop_probability must lie in [0, 1]");
        }
        Ok(NetworkConfig { latency: self.latency, drop_probability: self.drop_probability, seed: self.seed })
    }
}

/// Block stream for `simulate` and the transaction workload for `conflicts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub blocks: u64,
    pub block_bytes: u64,
    pub block_interval_ms: f64,
    pub drain_ms: f64,
    pub n_keys: u32,
    pub rounds: u32,
    pub rate_tx_per_s: f64,
    pub block_periods_ms: Vec<f64>,
    pub max_txs: usize,
    pub validation_ms_per_tx: f64,
    pub ordering_delay_ms: f64,
    pub tx_bytes: u64,
    pub runs: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endorser: Option<PeerId>,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        let d = DisseminationParams::default();
        let c = ConflictParams::default();
        Self {
            blocks: d.blocks,
            block_bytes: d.block_bytes,
            block_interval_ms: d.block_interval_ms,
            drain_ms: d.drain_ms,
            n_keys: c.workload.n_keys,
            rounds: c.workload.rounds,
            rate_tx_per_s: c.workload.rate_tx_per_s,
            block_periods_ms: vec![2000.0, 1500.0, 1000.0, 750.0],
            max_txs: c.max_txs,
            validation_ms_per_tx: c.validation_ms_per_tx,
            ordering_delay_ms: c.ordering_delay_ms,
            tx_bytes: c.tx_bytes,
            runs: 5,
            endorser: None,
        }
    }
}

impl WorkloadSection {
    pub fn dissemination(&self, output: &OutputSection) -> Result<DisseminationParams, ConfigError> {
        if self.blocks < 1 || self.block_bytes < 1 {
            return bad("workload.blocks and workload.block_bytes must be positive");
        }
        if !nonneg(self.block_interval_ms) || !nonneg(self.drain_ms) {
            return bad("workload.block_interval_ms and drain_ms must be finite and nonnegative");
        }
        Ok(DisseminationParams {
            blocks: self.blocks,
            block_bytes: self.block_bytes,
            block_interval_ms: self.block_interval_ms,
            drain_ms: self.drain_ms,
            resolution_ms: output.resolution_ms,
        })
    }

    pub fn conflicts(&self, block_period_ms: f64, n: u32) -> Result<ConflictParams, ConfigError> {
        if self.n_keys < 1 || self.rounds < 1 {
            return bad("workload.n_keys and workload.rounds must be positive");
        }
        if !(self.rate_tx_per_s.is_finite() && self.rate_tx_per_s > 0.0) {
            return bad("workload.rate_tx_per_s must be positive");
        }
        if !nonneg(block_period_ms) || !nonneg(self.validation_ms_per_tx) || !nonneg(self.ordering_delay_ms) {
            return bad("workload timings must be finite and nonnegative");
        }
        if self.max_txs < 1 {
            return bad("workload.max_txs must be at least 1");
        }
        if let Some(e) = self.endorser {
            if e == 0 || e >= n {
                return bad(format!("workload.endorser must be a non-leader peer in 1..{n}"));
            }
        }
        Ok(ConflictParams {
            workload: WorkloadParams { n_keys: self.n_keys, rounds: self.rounds, rate_tx_per_s: self.rate_tx_per_s },
            block_timer_ms: block_period_ms,
            max_txs: self.max_txs,
            validation_ms_per_tx: self.validation_ms_per_tx,
            ordering_delay_ms: self.ordering_delay_ms,
            tx_bytes: self.tx_bytes,
            endorser: self.endorser,
            ..ConflictParams::default()
        })
    }

    pub fn validate_conflicts(&self, n: u32) -> Result<(), ConfigError> {
        if self.runs < 1 {
            return bad("workload.runs must be at least 1");
        }
        if self.block_periods_ms.is_empty() {
            return bad("workload.block_periods_ms must not be empty");
        }
        for &p in &self.block_periods_ms {
            self.conflicts(p, n)?;
        }
        Ok(())
    }
}

fn nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    /// Bandwidth series bucket width.
    pub bucket_ms: f64,
    /// Traffic counter resolution; `bucket_ms` must be a multiple of it.
    pub resolution_ms: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
            bucket_ms: gossipsim_core::metrics::DEFAULT_BUCKET_MS,
            resolution_ms: 1000.0,
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.resolution_ms.is_finite() && self.resolution_ms > 0.0) {
            return bad("output.resolution_ms must be positive");
        }
        let k = self.bucket_ms / self.resolution_ms;
        if !(k >= 1.0 && (k - k.round()).abs() < 1e-9) {
            return bad("output.bucket_ms must be a positive multiple of output.resolution_ms");
        }
        Ok(())
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<u32>,
    pub f_out: Option<u32>,
    pub ttl: Option<u32>,
    pub ttl_direct: Option<u32>,
    pub blocks: Option<u64>,
    pub runs: Option<u32>,
    pub block_periods_ms: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// File (if any) plus overrides.
    pub fn assemble(path: Option<&Path>, o: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(o);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let p = &mut self.protocol;
        if o.mode.is_some() {
            p.mode = o.mode;
        }
        p.n = o.n.or(p.n);
        p.f_out = o.f_out.or(p.f_out);
        if o.ttl.is_some() {
            p.ttl = o.ttl;
            p.p_e_target = None;
        }
        p.ttl_direct = o.ttl_direct.or(p.ttl_direct);
        if let Some(seed) = o.seed {
            self.network.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(b) = o.blocks {
            self.workload.blocks = b;
        }
        if let Some(r) = o.runs {
            self.workload.runs = r;
        }
        if let Some(p) = &o.block_periods_ms {
            self.workload.block_periods_ms = p.clone();
        }
    }

    /// Everything a `simulate` run needs, validated.
    pub fn resolve_simulation(&self) -> Result<ResolvedSimulation, ConfigError> {
        self.output.validate()?;
        Ok(ResolvedSimulation {
            protocol: self.protocol.resolve()?,
            network: self.network.resolve()?,
            dissemination: self.workload.dissemination(&self.output)?,
        })
    }

    /// The fully explicit form of this config for `protocol`.
    pub fn resolved(&self, protocol: &ProtocolConfig) -> Self {
        Self { protocol: ProtocolSection::from_resolved(protocol), ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedSimulation {
    pub protocol: ProtocolConfig,
    pub network: NetworkConfig,
    pub dissemination: DisseminationParams,
}

/// Kernel names accepted on the command line.
pub fn parse_kernel(s: &str) -> Result<Kernel, ConfigError> {
    match s {
        "exponential" => Ok(Kernel::Exponential),
        "binomial" => Ok(Kernel::Binomial),
        other => bad(format!("unknown kernel {other:?} (expected exponential or binomial)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_reference_settings() {
        let b = ExperimentConfig::default().protocol.resolve().unwrap();
        assert_eq!(b, ProtocolConfig::baseline(100));
        let sec = ProtocolSection { mode: Some(Mode::Enhanced), ..Default::default() };
        let e = sec.resolve().unwrap();
        assert_eq!((e.f_out, e.ttl, e.ttl_direct, e.f_out_leader), (4, 9, 2, 1));
        assert_eq!(e.t_push_ms, 0.0);
    }

    #[test]
    fn mode_irrelevant_fields_are_rejected() {
        let cfg = ExperimentConfig::parse(r#"{"protocol": {"mode": "baseline", "ttl": 9}}"#).unwrap();
        let err = cfg.protocol.resolve().unwrap_err();
        assert!(err.0.contains("ttl"), "{err}");
        let cfg = ExperimentConfig::parse(r#"{"protocol": {"mode": "enhanced", "f_in": 3}}"#).unwrap();
        assert!(cfg.protocol.resolve().is_err());
        assert!(cfg.protocol.resolve_for(Mode::Enhanced, false).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"protocol": {"fanout": 3}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"extra": {}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"network": {"latency": {"base_ms": 1}}}"#).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides { mode: Some(Mode::Enhanced), seed: Some(7), n: Some(50), ..Default::default() });
        let resolved = cfg.resolve_simulation().unwrap();
        let explicit = cfg.resolved(&resolved.protocol);
        let again = ExperimentConfig::parse(&explicit.to_json()).unwrap();
        assert_eq!(again, explicit);
        let r2 = again.resolve_simulation().unwrap();
        assert_eq!(r2.protocol, resolved.protocol);
        assert_eq!(r2.network, resolved.network);
        assert_eq!(r2.dissemination, resolved.dissemination);
    }

    #[test]
    fn ttl_and_target_conflict() {
        let s =
            ProtocolSection { mode: Some(Mode::Enhanced), ttl: Some(9), p_e_target: Some(1e-6), ..Default::default() };
        assert!(s.resolve().is_err());
        let s = ProtocolSection { mode: Some(Mode::Enhanced), p_e_target: Some(1e-12), ..Default::default() };
        assert_eq!(s.resolve().unwrap().ttl, 12);
    }

    #[test]
    fn output_bucket_must_align() {
        let o = OutputSection { bucket_ms: 1500.0, ..OutputSection::default() };
        assert!(o.validate().is_err());
        assert!(OutputSection::default().validate().is_ok());
    }

    #[test]
    fn cli_ttl_clears_file_target() {
        let mut cfg = ExperimentConfig::parse(r#"{"protocol": {"mode": "enhanced", "p_e_target": 1e-9}}"#).unwrap();
        cfg.apply(&Overrides { ttl: Some(7), ..Default::default() });
        assert_eq!(cfg.protocol.resolve().unwrap().ttl, 7);
    }
}
