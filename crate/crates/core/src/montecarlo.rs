//! Connectivity-only push trials: no latency, just who reaches whom.
//!
//! Each trial is independent and seeded by `derive_seed(seed, index)`, so a
//! parallel driver gets the same outcomes as [`run_trials`].

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::protocol::{Mode, ProtocolConfig};
use crate::rng::{self, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub mode: Mode,
    pub n: u32,
    pub f_out: u32,
    pub f_out_leader: u32,
    pub ttl: u32,
    pub ttl_direct: u32,
}

impl TrialParams {
    pub fn baseline(n: u32, f_out: u32) -> Self {
        Self { mode: Mode::Baseline, n, f_out, f_out_leader: f_out, ttl: 0, ttl_direct: 0 }
    }

    pub fn enhanced(n: u32, f_out: u32, ttl: u32, ttl_direct: u32) -> Self {
        Self { mode: Mode::Enhanced, n, f_out, f_out_leader: 1, ttl, ttl_direct }
    }

    pub fn from_config(cfg: &ProtocolConfig) -> Self {
        Self {
            mode: cfg.mode,
            n: cfg.n,
            f_out: cfg.f_out,
            f_out_leader: cfg.f_out_leader,
            ttl: cfg.ttl,
            ttl_direct: cfg.ttl_direct,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Peers holding the block when push ends, leader included.
    pub informed: u32,
    pub full_block_transmissions: u64,
    pub digests: u64,
    pub digest_requests: u64,
}

impl TrialOutcome {
    pub fn failed(&self, n: u32) -> bool {
        self.informed < n
    }
}

/// Reusable per-thread buffers.
#[derive(Debug, Default)]
pub struct Scratch {
    informed: Vec<bool>,
    level_stamp: Vec<u32>,
    current: Vec<u32>,
    next: Vec<u32>,
    targets: Vec<u32>,
}

pub fn trial(params: &TrialParams, seed: u64, index: u64, scratch: &mut Scratch) -> TrialOutcome {
    let mut rng = rng::stream(rng::derive_seed(seed, index), 0);
    match params.mode {
        Mode::Baseline => infect_and_die(params, &mut rng, scratch),
        Mode::Enhanced => infect_upon_contagion(params, &mut rng, scratch),
    }
}

fn reset(scratch: &mut Scratch, n: u32) {
    scratch.informed.clear();
    scratch.informed.resize(n as usize, false);
    scratch.level_stamp.clear();
    scratch.level_stamp.resize(n as usize, 0);
    scratch.current.clear();
    scratch.next.clear();
}

/// Leader 0 pushes to `f_out_leader` peers; every peer that receives the
/// block for the first time pushes it once to `f_out` peers.
fn infect_and_die(p: &TrialParams, rng: &mut SimRng, s: &mut Scratch) -> TrialOutcome {
    reset(s, p.n);
    let mut out = TrialOutcome { informed: 1, ..TrialOutcome::default() };
    s.informed[0] = true;
    s.current.push(0);
    let mut first = true;
    while let Some(peer) = s.current.pop() {
        let k = if first { p.f_out_leader } else { p.f_out };
        first = false;
        rng::sample_others_into(rng, p.n, peer, k, &mut s.targets);
        out.full_block_transmissions += s.targets.len() as u64;
        for &t in &s.targets {
            if !s.informed[t as usize] {
                s.informed[t as usize] = true;
                out.informed += 1;
                s.current.push(t);
            }
        }
    }
    out
}

/// Level-synchronous counter rounds. The set at level `c` holds the peers
/// that saw the pair `(b, c)`; each forwards counter `c + 1` to `f_out`
/// peers while `c + 1 <= ttl`. Counters up to `ttl_direct` carry the block;
/// a digest reaching an uninformed peer costs one request and one transfer.
fn infect_upon_contagion(p: &TrialParams, rng: &mut SimRng, s: &mut Scratch) -> TrialOutcome {
    reset(s, p.n);
    let mut out = TrialOutcome { informed: 1, ..TrialOutcome::default() };
    s.informed[0] = true;
    rng::sample_others_into(rng, p.n, 0, p.f_out_leader, &mut s.targets);
    out.full_block_transmissions += s.targets.len() as u64;
    for &t in &s.targets {
        s.informed[t as usize] = true;
        out.informed += 1;
        s.current.push(t);
    }
    for c in 0..p.ttl {
        let counter = c + 1;
        let direct = counter <= p.ttl_direct;
        s.next.clear();
        for i in 0..s.current.len() {
            let peer = s.current[i];
            rng::sample_others_into(rng, p.n, peer, p.f_out, &mut s.targets);
            for &t in &s.targets {
                if direct {
                    out.full_block_transmissions += 1;
                } else {
                    out.digests += 1;
                }
                if !s.informed[t as usize] {
                    s.informed[t as usize] = true;
                    out.informed += 1;
                    if !direct {
                        out.digest_requests += 1;
                        out.full_block_transmissions += 1;
                    }
                }
                // stamps are offset by one so the zeroed array means "never"
                if s.level_stamp[t as usize] != counter + 1 {
                    s.level_stamp[t as usize] = counter + 1;
                    s.next.push(t);
                }
            }
        }
        core::mem::swap(&mut s.current, &mut s.next);
        if s.current.is_empty() {
            break;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub informed_mean: f64,
    /// Population standard deviation.
    pub informed_std: f64,
    pub informed_min: u32,
    pub informed_max: u32,
    pub transmissions_mean: f64,
    pub digests_mean: f64,
    pub digest_requests_mean: f64,
    pub failed: u64,
}

impl TrialStats {
    /// Summarize outcomes in slice order; `None` for an empty slice.
    pub fn from_outcomes(n: u32, outcomes: &[TrialOutcome]) -> Option<Self> {
        if outcomes.is_empty() {
            return None;
        }
        let k = outcomes.len() as f64;
        let mean = |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / k;
        let informed_mean = mean(&|o| f64::from(o.informed));
        let var = mean(&|o| {
            let d = f64::from(o.informed) - informed_mean;
            d * d
        });
        Some(Self {
            trials: outcomes.len() as u64,
            informed_mean,
            informed_std: math::sqrt(var),
            informed_min: outcomes.iter().map(|o| o.informed).min().unwrap_or(0),
            informed_max: outcomes.iter().map(|o| o.informed).max().unwrap_or(0),
            transmissions_mean: mean(&|o| o.full_block_transmissions as f64),
            digests_mean: mean(&|o| o.digests as f64),
            digest_requests_mean: mean(&|o| o.digest_requests as f64),
            failed: outcomes.iter().filter(|o| o.failed(n)).count() as u64,
        })
    }
}

/// Sequential driver.
pub fn run_trials(params: &TrialParams, trials: u64, seed: u64) -> Vec<TrialOutcome> {
    let mut scratch = Scratch::default();
    (0..trials).map(|i| trial(params, seed, i, &mut scratch)).collect()
}

/// Number of trials per informed count `0..=n`.
pub fn informed_histogram(n: u32, outcomes: &[TrialOutcome]) -> Vec<u64> {
    let mut h = vec![0u64; n as usize + 1];
    for o in outcomes {
        h[o.informed as usize] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{psi, PushParams};

    #[test]
    fn baseline_transmissions_are_f_out_per_informed_peer() {
        let p = TrialParams::baseline(100, 3);
        for o in run_trials(&p, 200, 1) {
            assert_eq!(o.full_block_transmissions, 3 * u64::from(o.informed));
            assert!(o.informed <= 100);
            assert_eq!(o.digests, 0);
        }
    }

    #[test]
    fn baseline_reach_matches_reference() {
        let p = TrialParams::baseline(100, 3);
        let out = run_trials(&p, 10_000, 42);
        let s = TrialStats::from_outcomes(100, &out).unwrap();
        assert!((s.informed_mean - 94.0).abs() < 0.5, "{s:?}");
        assert!((s.informed_std - 2.6).abs() < 0.5, "{s:?}");
        assert!((s.transmissions_mean - 282.0).abs() < 2.0, "{s:?}");
    }

    #[test]
    fn enhanced_reaches_everyone_and_counts_digests() {
        let p = TrialParams::enhanced(100, 4, 9, 2);
        let out = run_trials(&p, 2_000, 9);
        let s = TrialStats::from_outcomes(100, &out).unwrap();
        assert_eq!(s.failed, 0);
        // every message below ttl is either direct or a digest
        for o in &out {
            assert!(o.full_block_transmissions <= 130);
            // one hand-off, whole direct rounds of 4, one transfer per request
            assert_eq!((o.full_block_transmissions - o.digest_requests - 1) % 4, 0);
            assert_eq!(o.digests % 4, 0);
        }
        // digests come from levels ttl_direct..ttl
        let pp = PushParams::new(100, 4, 9).unwrap();
        let expected: f64 = (2..9).map(|i| 4.0 * psi(i, &pp).unwrap()).sum();
        assert!((s.digests_mean - expected).abs() / expected < 0.05, "{} vs {expected}", s.digests_mean);
    }

    #[test]
    fn ttl_zero_only_hands_off() {
        let p = TrialParams::enhanced(10, 3, 0, 0);
        let o = run_trials(&p, 1, 0)[0];
        assert_eq!(o.informed, 2);
        assert_eq!(o.full_block_transmissions, 1);
    }

    #[test]
    fn trials_are_reproducible_by_index() {
        let p = TrialParams::enhanced(50, 3, 6, 1);
        let all = run_trials(&p, 20, 5);
        let mut s = Scratch::default();
        assert_eq!(all[13], trial(&p, 5, 13, &mut s));
        assert_eq!(informed_histogram(50, &all).iter().sum::<u64>(), 20);
    }

    #[test]
    fn empty_stats() {
        assert!(TrialStats::from_outcomes(3, &[]).is_none());
    }
}
