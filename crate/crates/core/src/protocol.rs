//! Gossip state machines for block dissemination.
//!
//! **Baseline** runs three independent components:
//! - push, infect-and-die: a peer that receives a block for the first time
//!   buffers it and, when the buffer fills or `t_push` expires, sends the
//!   buffered blocks to `f_out` random peers. It never pushes that block again.
//! - pull: every `t_pull` each peer asks `f_in` random peers for the digests
//!   of their recent blocks and fetches the ones it lacks. Pulled blocks are
//!   not pushed.
//! - recovery: every `t_recovery` a peer behind the highest advertised ledger
//!   height fetches the missing consecutive range from a peer at that height.
//!
//! **Enhanced** replaces push with infect-upon-contagion: every block carries
//! a counter, and a peer forwards each `(block, counter)` pair the first time
//! it sees it, with the counter incremented, until the counter reaches `ttl`.
//! Counters up to `ttl_direct` carry the full block; later ones send a small
//! digest and the block is fetched only by peers that lack it. The leader
//! hands each block to `f_out_leader` random peers instead of gossiping it
//! itself, and pull is disabled. Recovery stays.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::Transaction;
use crate::metrics::{DisseminationTrace, ReceiptSource};
use crate::rng::{self, SimRng};
use crate::simnet::{Network, PeerId, VirtualTime, WireSize};

/// Fixed per-message overhead for control messages.
pub const CONTROL_BYTES: u64 = 32;
/// Per-sequence-number cost in digest lists.
pub const SEQ_BYTES: u64 = 8;
pub const HEIGHT_ADVERT_BYTES: u64 = 32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub seq: u64,
    pub size_bytes: u64,
    pub txs: Vec<Transaction>,
}

impl Block {
    pub fn new(seq: u64, size_bytes: u64, txs: Vec<Transaction>) -> Self {
        assert!(seq >= 1, "block sequence numbers start at 1");
        Self { seq, size_bytes: size_bytes.max(1), txs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GossipMessage {
    PushBlock { block: Arc<Block>, counter: u32 },
    BlockDigest { seq: u64, counter: u32, digest_bytes: u32 },
    DigestRequest { seq: u64, counter: u32 },
    PullDigestRequest,
    PullDigestResponse { seqs: Vec<u64> },
    PullBlockRequest { seqs: Vec<u64> },
    PullBlockResponse { blocks: Vec<Arc<Block>> },
    RecoveryRequest { from_seq: u64, to_seq: u64 },
    RecoveryResponse { blocks: Vec<Arc<Block>> },
    HeightAdvert { height: u64 },
}

impl WireSize for GossipMessage {
    fn wire_bytes(&self) -> u64 {
        use GossipMessage::*;
        match self {
            PushBlock { block, .. } => CONTROL_BYTES + block.size_bytes,
            BlockDigest { digest_bytes, .. } => u64::from(*digest_bytes),
            DigestRequest { .. } | PullDigestRequest | RecoveryRequest { .. } => CONTROL_BYTES,
            PullDigestResponse { seqs } | PullBlockRequest { seqs } => CONTROL_BYTES + SEQ_BYTES * seqs.len() as u64,
            PullBlockResponse { blocks } | RecoveryResponse { blocks } => {
                CONTROL_BYTES + blocks.iter().map(|b| b.size_bytes).sum::<u64>()
            }
            HeightAdvert { .. } => HEIGHT_ADVERT_BYTES,
        }
    }

    fn payload_bytes(&self) -> u64 {
        use GossipMessage::*;
        match self {
            PushBlock { block, .. } => block.size_bytes,
            PullBlockResponse { blocks } | RecoveryResponse { blocks } => blocks.iter().map(|b| b.size_bytes).sum(),
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Baseline,
    Enhanced,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Enhanced => "enhanced",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Invalid(&'static str),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Invalid(why) => write!(f, "invalid protocol configuration: {why}"),
        }
    }
}

impl core::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mode: Mode,
    pub n: u32,
    pub f_out: u32,
    pub f_out_leader: u32,
    pub f_in: u32,
    pub t_push_ms: f64,
    pub t_pull_ms: f64,
    pub t_recovery_ms: f64,
    pub ttl: u32,
    pub ttl_direct: u32,
    pub digest_bytes: u32,
    pub push_buffer_capacity: usize,
    /// Number of most recent block seqs a pull responder advertises.
    pub pull_window: usize,
    pub recovery: bool,
    pub metadata_interval_ms: f64,
    pub metadata_fanout: u32,
}

impl ProtocolConfig {
    pub fn baseline(n: u32) -> Self {
        Self {
            mode: Mode::Baseline,
            n,
            f_out: 3,
            f_out_leader: 3,
            f_in: 3,
            t_push_ms: 10.0,
            t_pull_ms: 4000.0,
            t_recovery_ms: 10_000.0,
            ttl: 0,
            ttl_direct: 0,
            digest_bytes: 64,
            push_buffer_capacity: 10,
            pull_window: 16,
            recovery: true,
            metadata_interval_ms: 1000.0,
            metadata_fanout: 3,
        }
    }

    pub fn enhanced(n: u32, f_out: u32, ttl: u32, ttl_direct: u32) -> Self {
        Self {
            mode: Mode::Enhanced,
            f_out,
            f_out_leader: 1,
            f_in: 0,
            t_push_ms: 0.0,
            t_pull_ms: 0.0,
            ttl,
            ttl_direct,
            ..Self::baseline(n)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        use ConfigError::Invalid;
        if self.n < 2 {
            return Err(Invalid("n must be at least 2"));
        }
        if self.f_out < 1 {
            return Err(Invalid("f_out must be at least 1"));
        }
        let times = [self.t_push_ms, self.t_pull_ms, self.t_recovery_ms, self.metadata_interval_ms];
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Invalid("timers must be finite and nonnegative"));
        }
        if self.push_buffer_capacity < 1 {
            return Err(Invalid("push_buffer_capacity must be at least 1"));
        }
        if self.recovery && (self.t_recovery_ms <= 0.0 || self.metadata_interval_ms <= 0.0) {
            return Err(Invalid("recovery needs positive t_recovery_ms and metadata_interval_ms"));
        }
        match self.mode {
            Mode::Baseline => {
                if self.f_in < 1 || self.t_pull_ms <= 0.0 {
                    return Err(Invalid("baseline pull needs f_in >= 1 and t_pull_ms > 0"));
                }
                if self.pull_window < 1 {
                    return Err(Invalid("pull_window must be at least 1"));
                }
            }
            Mode::Enhanced => {
                if self.ttl_direct > self.ttl {
                    return Err(Invalid("ttl_direct must not exceed ttl"));
                }
                if self.f_out_leader < 1 {
                    return Err(Invalid("f_out_leader must be at least 1"));
                }
                if self.f_in != 0 || self.t_pull_ms != 0.0 {
                    return Err(Invalid("enhanced mode runs without pull"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GossipTimer {
    PushFlush(PeerId),
    Pull(PeerId),
    Recovery(PeerId),
    Metadata(PeerId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PendingPush {
    seq: u64,
    counter: u32,
}

#[derive(Clone, Debug, Default)]
pub struct PeerState {
    pub id: PeerId,
    pub held_blocks: BTreeMap<u64, Arc<Block>>,
    pub seen_pairs: BTreeSet<(u64, u32)>,
    /// Largest `h` such that blocks `1..=h` are all held.
    pub height: u64,
    pub infected: BTreeSet<u64>,
    pending_push_buffer: Vec<PendingPush>,
    flush_armed: bool,
    /// Forwards held back until the payload of a digested block arrives.
    awaiting_payload: BTreeMap<u64, Vec<u32>>,
    advertised_heights: BTreeMap<PeerId, u64>,
    last_seen_max_height: u64,
}

impl PeerState {
    fn new(id: PeerId) -> Self {
        Self { id, ..Self::default() }
    }

    pub fn holds(&self, seq: u64) -> bool {
        self.held_blocks.contains_key(&seq)
    }

    pub fn block(&self, seq: u64) -> Option<&Arc<Block>> {
        self.held_blocks.get(&seq)
    }
}

/// Message and transfer counters of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolStats {
    /// Full blocks sent by push (enhanced: counters `0..=ttl_direct`).
    pub push_block_sends: u64,
    /// Full blocks sent in answer to a digest request.
    pub digest_response_sends: u64,
    pub pull_block_sends: u64,
    pub recovery_block_sends: u64,
    pub digests_sent: u64,
    pub digest_requests_sent: u64,
    pub pull_rounds: u64,
    pub recovery_requests: u64,
    pub height_adverts: u64,
    /// Forwarding actions (one per consumed pair below `ttl`, or per buffered block).
    pub forward_actions: u64,
    pub max_counter_sent: u32,
    pub duplicate_orderer_blocks: u64,
}

impl ProtocolStats {
    pub fn full_block_sends(&self) -> u64 {
        self.push_block_sends + self.digest_response_sends + self.pull_block_sends + self.recovery_block_sends
    }
}

/// All peers of one network running one protocol.
pub struct Gossip {
    cfg: ProtocolConfig,
    leader: PeerId,
    peers: Vec<PeerState>,
    rngs: Vec<SimRng>,
    trace: DisseminationTrace,
    stats: ProtocolStats,
    arrivals: Vec<(PeerId, u64)>,
    forward_log: Option<Vec<(PeerId, u64, u32)>>,
    targets: Vec<PeerId>,
}

impl Gossip {
    /// Peers `0..n`; `leader` receives blocks from the orderer. Peer `p`
    /// samples from stream `p + 1` of `seed`.
    pub fn new(cfg: ProtocolConfig, leader: PeerId, seed: u64, trace_resolution_ms: f64) -> Self {
        cfg.validate().expect("protocol configuration must be validated before use");
        assert!(leader < cfg.n);
        let n = cfg.n;
        Self {
            leader,
            peers: (0..n).map(PeerState::new).collect(),
            rngs: (0..n).map(|p| rng::stream(seed, u64::from(p) + 1)).collect(),
            trace: DisseminationTrace::new(n, trace_resolution_ms),
            stats: ProtocolStats::default(),
            arrivals: Vec::new(),
            forward_log: None,
            targets: Vec::with_capacity(cfg.f_out as usize),
            cfg,
        }
    }

    /// Keep a `(peer, seq, counter)` entry for every forwarding action.
    pub fn record_forwards(&mut self) {
        self.forward_log = Some(Vec::new());
    }

    pub fn forward_log(&self) -> Option<&[(PeerId, u64, u32)]> {
        self.forward_log.as_deref()
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn leader(&self) -> PeerId {
        self.leader
    }

    pub fn peer(&self, id: PeerId) -> &PeerState {
        &self.peers[id as usize]
    }

    pub fn peers(&self) -> &[PeerState] {
        &self.peers
    }

    pub fn stats(&self) -> &ProtocolStats {
        &self.stats
    }

    pub fn trace(&self) -> &DisseminationTrace {
        &self.trace
    }

    pub fn into_parts(self) -> (DisseminationTrace, ProtocolStats) {
        (self.trace, self.stats)
    }

    /// `(peer, seq)` payloads that arrived since the last call.
    pub fn take_arrivals(&mut self) -> Vec<(PeerId, u64)> {
        core::mem::take(&mut self.arrivals)
    }

    /// Arm the periodic pull, recovery and metadata timers with a random
    /// phase per peer.
    pub fn start<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>) {
        let now = net.now();
        for p in 0..self.cfg.n {
            let rng = &mut self.rngs[p as usize];
            if self.cfg.mode == Mode::Baseline {
                let phase = rng.gen_range(0.0..self.cfg.t_pull_ms);
                net.schedule(now + phase, GossipTimer::Pull(p).into());
            }
            if self.cfg.recovery {
                let phase = rng.gen_range(0.0..self.cfg.t_recovery_ms);
                net.schedule(now + phase, GossipTimer::Recovery(p).into());
                let phase = rng.gen_range(0.0..self.cfg.metadata_interval_ms);
                net.schedule(now + phase, GossipTimer::Metadata(p).into());
            }
        }
    }

    /// The ordering service hands `block` to the leader.
    pub fn orderer_deliver<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, block: Block) {
        let seq = block.seq;
        let started = self.trace.blocks().len() as u64;
        if seq <= started {
            log::warn!("orderer delivered block {seq} twice; ignoring");
            self.stats.duplicate_orderer_blocks += 1;
            return;
        }
        assert_eq!(seq, started + 1, "orderer skipped a sequence number");
        let leader = self.leader;
        self.trace.record_start(seq, net.now());
        let block = Arc::new(block);
        self.store(leader, block.clone(), ReceiptSource::Orderer, net.now());
        match self.cfg.mode {
            Mode::Baseline => {
                self.peers[leader as usize].infected.insert(seq);
                self.enqueue_push(net, leader, PendingPush { seq, counter: 0 });
            }
            Mode::Enhanced => {
                sample_into(&mut self.rngs, &mut self.targets, self.cfg.n, leader, self.cfg.f_out_leader);
                let targets = core::mem::take(&mut self.targets);
                for &to in &targets {
                    self.stats.push_block_sends += 1;
                    net.send(leader, to, GossipMessage::PushBlock { block: block.clone(), counter: 0 });
                }
                self.targets = targets;
            }
        }
    }

    pub fn handle_timer<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, timer: GossipTimer) {
        match timer {
            GossipTimer::PushFlush(p) => {
                self.peers[p as usize].flush_armed = false;
                self.flush(net, p);
            }
            GossipTimer::Pull(p) => self.pull_round(net, p),
            GossipTimer::Recovery(p) => self.recovery_round(net, p),
            GossipTimer::Metadata(p) => {
                let height = self.peers[p as usize].height;
                sample_into(&mut self.rngs, &mut self.targets, self.cfg.n, p, self.cfg.metadata_fanout);
                for i in 0..self.targets.len() {
                    self.stats.height_adverts += 1;
                    net.send(p, self.targets[i], GossipMessage::HeightAdvert { height });
                }
                net.schedule_in(self.cfg.metadata_interval_ms, GossipTimer::Metadata(p).into());
            }
        }
    }

    pub fn handle_message<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        from: PeerId,
        to: PeerId,
        msg: GossipMessage,
    ) {
        let now = net.now();
        match msg {
            GossipMessage::PushBlock { block, counter } => match self.cfg.mode {
                Mode::Baseline => self.handle_push_baseline(net, to, block),
                Mode::Enhanced => {
                    let seq = block.seq;
                    let source = if self.peers[to as usize].awaiting_payload.contains_key(&seq) {
                        ReceiptSource::DigestResponse
                    } else {
                        ReceiptSource::Push
                    };
                    self.store(to, block, source, now);
                    self.handle_pair_enhanced(net, to, from, seq, counter);
                    self.release_awaiting(net, to, seq);
                }
            },
            GossipMessage::BlockDigest { seq, counter, .. } => {
                self.handle_pair_enhanced(net, to, from, seq, counter);
            }
            GossipMessage::DigestRequest { seq, counter } => {
                self.handle_digest_request(net, to, from, seq, counter);
            }
            GossipMessage::PullDigestRequest => {
                let peer = &self.peers[to as usize];
                let seqs: Vec<u64> = peer.held_blocks.keys().rev().take(self.cfg.pull_window).rev().copied().collect();
                net.send(to, from, GossipMessage::PullDigestResponse { seqs });
            }
            GossipMessage::PullDigestResponse { seqs } => {
                let peer = &self.peers[to as usize];
                let missing: Vec<u64> = seqs.into_iter().filter(|s| !peer.holds(*s)).collect();
                if !missing.is_empty() {
                    net.send(to, from, GossipMessage::PullBlockRequest { seqs: missing });
                }
            }
            GossipMessage::PullBlockRequest { seqs } => {
                let peer = &self.peers[to as usize];
                let blocks: Vec<Arc<Block>> = seqs.iter().filter_map(|s| peer.block(*s).cloned()).collect();
                if !blocks.is_empty() {
                    self.stats.pull_block_sends += blocks.len() as u64;
                    net.send(to, from, GossipMessage::PullBlockResponse { blocks });
                }
            }
            GossipMessage::PullBlockResponse { blocks } => {
                for block in blocks {
                    self.store_without_push(net, to, block, ReceiptSource::Pull);
                }
            }
            GossipMessage::RecoveryRequest { from_seq, to_seq } => {
                let peer = &self.peers[to as usize];
                let blocks: Vec<Arc<Block>> = (from_seq..=to_seq).map_while(|s| peer.block(s).cloned()).collect();
                if !blocks.is_empty() {
                    self.stats.recovery_block_sends += blocks.len() as u64;
                    net.send(to, from, GossipMessage::RecoveryResponse { blocks });
                }
            }
            GossipMessage::RecoveryResponse { blocks } => {
                for block in blocks {
                    self.store_without_push(net, to, block, ReceiptSource::Recovery);
                }
            }
            GossipMessage::HeightAdvert { height } => {
                let h = self.peers[to as usize].advertised_heights.entry(from).or_insert(0);
                *h = (*h).max(height);
            }
        }
    }

    /// Infect-and-die: buffer the block for one push on first receipt only.
    fn handle_push_baseline<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        peer: PeerId,
        block: Arc<Block>,
    ) {
        let seq = block.seq;
        self.store(peer, block, ReceiptSource::Push, net.now());
        if self.peers[peer as usize].infected.insert(seq) {
            self.enqueue_push(net, peer, PendingPush { seq, counter: 0 });
        }
    }

    /// First sight of `(seq, counter)` at `peer` obliges one forward with
    /// `counter + 1`, unless that would exceed `ttl`. A digest for a block
    /// the peer lacks consumes the pair at once and defers the forward until
    /// the payload arrives.
    fn handle_pair_enhanced<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        peer: PeerId,
        from: PeerId,
        seq: u64,
        counter: u32,
    ) {
        debug_assert!(counter <= self.cfg.ttl, "counter {counter} above ttl");
        let state = &mut self.peers[peer as usize];
        if counter > self.cfg.ttl || !state.seen_pairs.insert((seq, counter)) {
            return;
        }
        let next = counter + 1;
        let holds = state.holds(seq);
        if !holds {
            let first = !state.awaiting_payload.contains_key(&seq);
            let waiting = state.awaiting_payload.entry(seq).or_default();
            if next <= self.cfg.ttl {
                waiting.push(next);
            }
            if first {
                self.stats.digest_requests_sent += 1;
                net.send(peer, from, GossipMessage::DigestRequest { seq, counter });
            }
            return;
        }
        if next <= self.cfg.ttl {
            self.forward(net, peer, PendingPush { seq, counter: next });
        }
    }

    fn release_awaiting<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, peer: PeerId, seq: u64) {
        if let Some(counters) = self.peers[peer as usize].awaiting_payload.remove(&seq) {
            for counter in counters {
                self.forward(net, peer, PendingPush { seq, counter });
            }
        }
    }

    /// Answer a digest request with the full block, echoing the counter.
    fn handle_digest_request<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        peer: PeerId,
        requester: PeerId,
        seq: u64,
        counter: u32,
    ) {
        if let Some(block) = self.peers[peer as usize].block(seq).cloned() {
            self.stats.digest_response_sends += 1;
            net.send(peer, requester, GossipMessage::PushBlock { block, counter });
        }
    }

    fn forward<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, peer: PeerId, item: PendingPush) {
        if self.cfg.t_push_ms == 0.0 {
            self.send_batch(net, peer, &[item]);
        } else {
            self.enqueue_push(net, peer, item);
        }
    }

    fn enqueue_push<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        peer: PeerId,
        item: PendingPush,
    ) {
        let state = &mut self.peers[peer as usize];
        state.pending_push_buffer.push(item);
        if state.pending_push_buffer.len() >= self.cfg.push_buffer_capacity {
            self.flush(net, peer);
        } else if !state.flush_armed {
            state.flush_armed = true;
            net.schedule_in(self.cfg.t_push_ms, GossipTimer::PushFlush(peer).into());
        }
    }

    fn flush<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, peer: PeerId) {
        let items = core::mem::take(&mut self.peers[peer as usize].pending_push_buffer);
        if !items.is_empty() {
            self.send_batch(net, peer, &items);
        }
    }

    /// One forwarding action: a fresh sample of `f_out` peers receives every item.
    fn send_batch<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        peer: PeerId,
        items: &[PendingPush],
    ) {
        sample_into(&mut self.rngs, &mut self.targets, self.cfg.n, peer, self.cfg.f_out);
        let targets = core::mem::take(&mut self.targets);
        for item in items {
            self.stats.forward_actions += 1;
            self.stats.max_counter_sent = self.stats.max_counter_sent.max(item.counter);
            if let Some(log) = &mut self.forward_log {
                log.push((peer, item.seq, item.counter));
            }
            let block =
                self.peers[peer as usize].block(item.seq).cloned().expect("forwarding a block the peer does not hold");
            let direct = self.cfg.mode == Mode::Baseline || item.counter <= self.cfg.ttl_direct;
            for &to in &targets {
                let msg = if direct {
                    self.stats.push_block_sends += 1;
                    GossipMessage::PushBlock { block: block.clone(), counter: item.counter }
                } else {
                    self.stats.digests_sent += 1;
                    GossipMessage::BlockDigest {
                        seq: item.seq,
                        counter: item.counter,
                        digest_bytes: self.cfg.digest_bytes,
                    }
                };
                net.send(peer, to, msg);
            }
        }
        self.targets = targets;
    }

    fn pull_round<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, peer: PeerId) {
        debug_assert_eq!(self.cfg.mode, Mode::Baseline);
        self.stats.pull_rounds += 1;
        sample_into(&mut self.rngs, &mut self.targets, self.cfg.n, peer, self.cfg.f_in);
        for i in 0..self.targets.len() {
            net.send(peer, self.targets[i], GossipMessage::PullDigestRequest);
        }
        net.schedule_in(self.cfg.t_pull_ms, GossipTimer::Pull(peer).into());
    }

    /// Fetch the missing range from a peer at the highest advertised height.
    /// Only a lag that was already visible at the previous round triggers a
    /// request, so blocks still being pushed are not fetched twice.
    fn recovery_round<T: From<GossipTimer>>(&mut self, net: &mut Network<GossipMessage, T>, peer: PeerId) {
        let state = &mut self.peers[peer as usize];
        let current_max = state.advertised_heights.values().copied().max().unwrap_or(0);
        let target = current_max.min(state.last_seen_max_height);
        state.last_seen_max_height = current_max;
        if target > state.height {
            let candidates: Vec<PeerId> =
                state.advertised_heights.iter().filter(|(_, &h)| h >= target).map(|(&p, _)| p).collect();
            let from_seq = state.height + 1;
            let rng = &mut self.rngs[peer as usize];
            let source = candidates[rng.gen_range(0..candidates.len())];
            self.stats.recovery_requests += 1;
            net.send(peer, source, GossipMessage::RecoveryRequest { from_seq, to_seq: target });
        }
        net.schedule_in(self.cfg.t_recovery_ms, GossipTimer::Recovery(peer).into());
    }

    /// Store a payload received outside push; it is never pushed onwards.
    fn store_without_push<T: From<GossipTimer>>(
        &mut self,
        net: &mut Network<GossipMessage, T>,
        peer: PeerId,
        block: Arc<Block>,
        source: ReceiptSource,
    ) {
        let seq = block.seq;
        self.store(peer, block, source, net.now());
        if self.cfg.mode == Mode::Baseline {
            self.peers[peer as usize].infected.insert(seq);
        }
        // An enhanced peer waiting on a digest can forward now.
        self.release_awaiting(net, peer, seq);
    }

    fn store(&mut self, peer: PeerId, block: Arc<Block>, source: ReceiptSource, now: VirtualTime) {
        let seq = block.seq;
        let state = &mut self.peers[peer as usize];
        if state.held_blocks.contains_key(&seq) {
            return;
        }
        state.held_blocks.insert(seq, block);
        while state.held_blocks.contains_key(&(state.height + 1)) {
            state.height += 1;
        }
        self.trace.record_receipt(seq, peer, now, source);
        self.arrivals.push((peer, seq));
    }
}

fn sample_into(rngs: &mut [SimRng], out: &mut Vec<PeerId>, n: u32, me: PeerId, k: u32) {
    rng::sample_others_into(&mut rngs[me as usize], n, me, k, out);
}
