//! Timed experiments on top of [`Network`] and [`Gossip`].
//!
//! [`run_dissemination`] streams fixed-size blocks from the orderer to the
//! leader and records when every peer receives each one.
//! [`run_conflicts`] adds the transaction pipeline: client, single endorser,
//! ordering delay, block producer, gossip and per-peer FIFO validation.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{self, BlockProducer, ProducerAction, Replica, Transaction, WorkloadParams};
use crate::metrics::{DisseminationTrace, TrafficRecorder};
use crate::protocol::{Block, Gossip, GossipMessage, GossipTimer, ProtocolConfig, ProtocolStats, CONTROL_BYTES};
use crate::rng;
use crate::simnet::{Event, Network, NetworkConfig, PeerId, SimulationSummary, VirtualTime};

#[derive(Debug)]
enum Timer {
    Gossip(GossipTimer),
    LeaderReceive(Block),
    OrdererCut,
    ClientSubmit(usize),
    Endorse(usize),
    OrdererReceive(Transaction),
    BatchDeadline(u64),
    ValidationDone(PeerId),
}

impl From<GossipTimer> for Timer {
    fn from(t: GossipTimer) -> Self {
        Timer::Gossip(t)
    }
}

/// Orderer-to-leader hand-off that never overtakes an earlier block.
struct OrdererLink {
    last_arrival: VirtualTime,
    next_seq: u64,
}

impl OrdererLink {
    fn new() -> Self {
        Self { last_arrival: VirtualTime::ZERO, next_seq: 1 }
    }

    fn ship(&mut self, net: &mut Network<GossipMessage, Timer>, size_bytes: u64, txs: Vec<Transaction>) {
        let block = Block::new(self.next_seq, size_bytes, txs);
        self.next_seq += 1;
        let at = (net.now() + net.sample_delay(size_bytes)).max(self.last_arrival);
        self.last_arrival = at;
        net.schedule(at, Timer::LeaderReceive(block));
    }

    fn shipped(&self) -> u64 {
        self.next_seq - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisseminationParams {
    pub blocks: u64,
    pub block_bytes: u64,
    pub block_interval_ms: f64,
    /// Extra virtual time after the last block leaves the orderer.
    pub drain_ms: f64,
    /// Traffic counter resolution; bandwidth buckets must be multiples of it.
    pub resolution_ms: f64,
}

impl Default for DisseminationParams {
    fn default() -> Self {
        Self {
            blocks: 1000,
            block_bytes: 160_000,
            block_interval_ms: 1500.0,
            drain_ms: 60_000.0,
            resolution_ms: 1000.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DisseminationOutcome {
    pub trace: DisseminationTrace,
    pub traffic: TrafficRecorder,
    pub summary: SimulationSummary,
    pub stats: ProtocolStats,
    pub duration_ms: f64,
}

/// Leader is peer 0.
pub fn run_dissemination(
    protocol: &ProtocolConfig,
    network: &NetworkConfig,
    params: &DisseminationParams,
) -> DisseminationOutcome {
    assert!(params.blocks >= 1 && params.block_bytes >= 1);
    assert!(params.block_interval_ms >= 0.0 && params.drain_ms >= 0.0);
    let mut net: Network<GossipMessage, Timer> = Network::new(protocol.n, network, params.resolution_ms);
    let mut gossip = Gossip::new(protocol.clone(), 0, network.seed, params.resolution_ms);
    gossip.start(&mut net);
    let mut link = OrdererLink::new();

    net.schedule(VirtualTime::ZERO, Timer::OrdererCut);
    let last_cut = (params.blocks - 1) as f64 * params.block_interval_ms;
    let t_end = VirtualTime::from_ms(last_cut + params.drain_ms);
    while let Some((_, event)) = net.next_event(t_end) {
        match event {
            Event::Deliver { from, to, msg } => gossip.handle_message(&mut net, from, to, msg),
            Event::Timer(Timer::Gossip(t)) => gossip.handle_timer(&mut net, t),
            Event::Timer(Timer::LeaderReceive(block)) => gossip.orderer_deliver(&mut net, block),
            Event::Timer(Timer::OrdererCut) => {
                link.ship(&mut net, params.block_bytes, Vec::new());
                if link.shipped() < params.blocks {
                    net.schedule_in(params.block_interval_ms, Timer::OrdererCut);
                }
            }
            Event::Timer(other) => unreachable!("unexpected timer {other:?}"),
        }
        gossip.take_arrivals();
    }
    let summary = net.run_until(t_end, |_, _, _| {});
    let traffic = net.into_traffic();
    let (trace, stats) = gossip.into_parts();
    DisseminationOutcome { trace, traffic, summary, stats, duration_ms: t_end.as_ms() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictParams {
    pub workload: WorkloadParams,
    pub block_timer_ms: f64,
    pub max_txs: usize,
    pub validation_ms_per_tx: f64,
    /// Fixed delay between a transaction reaching the orderer and being
    /// available for block cutting.
    pub ordering_delay_ms: f64,
    pub tx_bytes: u64,
    /// Peer hosting the single endorser; a random non-leader when `None`.
    pub endorser: Option<PeerId>,
    /// Give up if the pipeline has not drained by this virtual time.
    pub max_duration_ms: f64,
}

impl Default for ConflictParams {
    fn default() -> Self {
        Self {
            workload: WorkloadParams::default(),
            block_timer_ms: 2000.0,
            max_txs: 500,
            validation_ms_per_tx: 50.0,
            ordering_delay_ms: 50.0,
            tx_bytes: 3200,
            endorser: None,
            max_duration_ms: 4.0 * 3600.0 * 1000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictOutcome {
    pub endorser: PeerId,
    pub transactions: u64,
    pub conflicts: u64,
    pub valid: u64,
    pub blocks: u64,
    pub txs_per_block_avg: f64,
    /// `transactions − Σ final counters` on the endorser's replica.
    pub counter_deficit: u64,
    /// Every replica validated every block into the same store.
    pub converged: bool,
    /// The pipeline drained before `max_duration_ms`.
    pub completed: bool,
    pub final_time_ms: f64,
    pub stats: ProtocolStats,
}

struct PeerValidation {
    replica: Replica,
    busy: bool,
    in_progress: Option<u64>,
}

struct ConflictRun<'a> {
    params: &'a ConflictParams,
    gossip: Gossip,
    producer: BlockProducer,
    link: OrdererLink,
    peers: Vec<PeerValidation>,
    intents: Vec<ledger::ScheduledIntent>,
    endorser: PeerId,
    in_flight: usize,
}

impl ConflictRun<'_> {
    fn try_validate(&mut self, net: &mut Network<GossipMessage, Timer>, peer: PeerId) {
        let v = &mut self.peers[peer as usize];
        if v.busy {
            return;
        }
        let next = v.replica.height + 1;
        let Some(block) = self.gossip.peer(peer).block(next) else { return };
        v.busy = true;
        v.in_progress = Some(next);
        let busy_ms = self.params.validation_ms_per_tx * block.txs.len() as f64;
        net.schedule_in(busy_ms, Timer::ValidationDone(peer));
    }

    fn finish_validation(&mut self, net: &mut Network<GossipMessage, Timer>, peer: PeerId) {
        let v = &mut self.peers[peer as usize];
        let seq = v.in_progress.take().expect("validation finished without a block");
        let block = self.gossip.peer(peer).block(seq).expect("validated block is held").clone();
        v.replica.validate_block(&block);
        v.busy = false;
        self.try_validate(net, peer);
    }

    fn cut(&mut self, net: &mut Network<GossipMessage, Timer>, txs: Vec<Transaction>) {
        let size = self.params.tx_bytes * txs.len() as u64;
        self.link.ship(net, size, txs);
    }

    fn done(&self) -> bool {
        self.in_flight == 0
            && self.producer.pending() == 0
            && self.peers.iter().all(|v| !v.busy && v.replica.height == self.link.shipped())
    }
}

/// Run the increment workload once. Leader is peer 0.
pub fn run_conflicts(protocol: &ProtocolConfig, network: &NetworkConfig, params: &ConflictParams) -> ConflictOutcome {
    assert!(params.block_timer_ms >= 0.0 && params.validation_ms_per_tx >= 0.0);
    assert!(params.ordering_delay_ms >= 0.0 && params.max_txs >= 1);
    let n = protocol.n;
    let seed = network.seed;
    let endorser = params.endorser.unwrap_or_else(|| {
        let mut pick = rng::stream(rng::derive_seed(seed, 0x656e_646f), 0);
        pick.gen_range(1..n)
    });
    assert!(endorser < n, "endorser {endorser} out of range");

    let mut net: Network<GossipMessage, Timer> = Network::new(n, network, crate::metrics::DEFAULT_BUCKET_MS);
    let mut run = ConflictRun {
        params,
        gossip: Gossip::new(protocol.clone(), 0, seed, crate::metrics::DEFAULT_BUCKET_MS),
        producer: BlockProducer::new(params.block_timer_ms, params.max_txs),
        link: OrdererLink::new(),
        peers: (0..n)
            .map(|_| PeerValidation { replica: Replica::new(params.workload.n_keys), busy: false, in_progress: None })
            .collect(),
        intents: ledger::increment_workload(&params.workload, seed),
        endorser,
        in_flight: 0,
    };
    run.gossip.start(&mut net);
    let mut pending_intents: VecDeque<usize> = (0..run.intents.len()).collect();
    if let Some(&first) = pending_intents.front() {
        net.schedule(run.intents[first].at, Timer::ClientSubmit(first));
        pending_intents.pop_front();
    }
    run.in_flight = run.intents.len();

    let t_max = VirtualTime::from_ms(params.max_duration_ms);
    let mut completed = false;
    while let Some((_, event)) = net.next_event(t_max) {
        match event {
            Event::Deliver { from, to, msg } => run.gossip.handle_message(&mut net, from, to, msg),
            Event::Timer(Timer::Gossip(t)) => run.gossip.handle_timer(&mut net, t),
            Event::Timer(Timer::LeaderReceive(block)) => run.gossip.orderer_deliver(&mut net, block),
            Event::Timer(Timer::ClientSubmit(i)) => {
                if let Some(next) = pending_intents.pop_front() {
                    net.schedule(run.intents[next].at, Timer::ClientSubmit(next));
                }
                let d = net.sample_delay(CONTROL_BYTES);
                net.schedule_in(d, Timer::Endorse(i));
            }
            Event::Timer(Timer::Endorse(i)) => {
                let store = &run.peers[run.endorser as usize].replica.store;
                let tx = ledger::endorse(run.intents[i].intent, store);
                let d = net.sample_delay(params.tx_bytes) + params.ordering_delay_ms;
                net.schedule_in(d, Timer::OrdererReceive(tx));
            }
            Event::Timer(Timer::OrdererReceive(tx)) => {
                run.in_flight -= 1;
                match run.producer.submit(tx, net.now()) {
                    ProducerAction::Nothing => {}
                    ProducerAction::ArmTimer { at, epoch } => net.schedule(at, Timer::BatchDeadline(epoch)),
                    ProducerAction::Cut(txs) => run.cut(&mut net, txs),
                }
            }
            Event::Timer(Timer::BatchDeadline(epoch)) => {
                if let Some(txs) = run.producer.on_timer(epoch) {
                    run.cut(&mut net, txs);
                }
            }
            Event::Timer(Timer::ValidationDone(peer)) => {
                run.finish_validation(&mut net, peer);
                if run.done() {
                    completed = true;
                    break;
                }
            }
            Event::Timer(other) => unreachable!("unexpected timer {other:?}"),
        }
        for (peer, _) in run.gossip.take_arrivals() {
            run.try_validate(&mut net, peer);
        }
    }

    let reference = &run.peers[run.endorser as usize].replica;
    let converged = completed
        && run.peers.iter().all(|v| v.replica.store == reference.store && v.replica.conflicts == reference.conflicts);
    let transactions = run.intents.len() as u64;
    let blocks = run.link.shipped();
    let sum = reference.store.sum_values();
    ConflictOutcome {
        endorser: run.endorser,
        transactions,
        conflicts: reference.conflicts,
        valid: reference.valid,
        blocks,
        txs_per_block_avg: if blocks == 0 { 0.0 } else { transactions as f64 / blocks as f64 },
        counter_deficit: transactions.saturating_sub(sum.max(0) as u64),
        converged,
        completed,
        final_time_ms: net.now().as_ms(),
        stats: run.gossip.stats().clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::LatencyModel;

    fn small_dissemination() -> DisseminationParams {
        DisseminationParams {
            blocks: 20,
            block_bytes: 16_000,
            block_interval_ms: 500.0,
            drain_ms: 30_000.0,
            resolution_ms: 1000.0,
        }
    }

    #[test]
    fn enhanced_delivers_everything_fast() {
        let cfg = ProtocolConfig::enhanced(30, 3, 8, 1);
        let out = run_dissemination(&cfg, &NetworkConfig::default(), &small_dissemination());
        assert!(out.trace.fully_delivered());
        assert_eq!(out.stats.recovery_block_sends, 0);
        let max = out.trace.latency_rows().map(|r| r.2).fold(0.0, f64::max);
        assert!(max < 100.0, "{max}");
        assert_eq!(out.traffic.total_bytes(), out.summary.bytes_received.iter().sum::<u64>());
    }

    #[test]
    fn baseline_delivers_everything_eventually() {
        let cfg = ProtocolConfig::baseline(30);
        let out = run_dissemination(&cfg, &NetworkConfig::default(), &small_dissemination());
        assert!(out.trace.fully_delivered(), "{:?}", out.trace.undelivered());
        assert!(out.stats.push_block_sends > 0);
    }

    #[test]
    fn dissemination_is_deterministic() {
        let cfg = ProtocolConfig::baseline(20);
        let p = small_dissemination();
        let net = NetworkConfig { seed: 11, ..NetworkConfig::default() };
        let a = run_dissemination(&cfg, &net, &p);
        let b = run_dissemination(&cfg, &net, &p);
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.trace, b.trace);
    }

    fn small_workload() -> ConflictParams {
        ConflictParams {
            workload: WorkloadParams { n_keys: 10, rounds: 10, rate_tx_per_s: 5.0 },
            ..ConflictParams::default()
        }
    }

    #[test]
    fn conflicts_identity_and_convergence() {
        let cfg = ProtocolConfig::baseline(20);
        let out = run_conflicts(&cfg, &NetworkConfig::default(), &small_workload());
        assert!(out.completed && out.converged);
        assert_eq!(out.transactions, 100);
        assert_eq!(out.conflicts + out.valid, 100);
        assert_eq!(out.conflicts, out.counter_deficit);
        assert_ne!(out.endorser, 0);
    }

    #[test]
    fn instantaneous_pipeline_has_no_conflicts() {
        let cfg = ProtocolConfig::enhanced(10, 3, 6, 1);
        let net = NetworkConfig { latency: LatencyModel::INSTANT, ..NetworkConfig::default() };
        let p = ConflictParams {
            block_timer_ms: 0.0,
            validation_ms_per_tx: 0.0,
            ordering_delay_ms: 0.0,
            ..small_workload()
        };
        let out = run_conflicts(&cfg, &net, &p);
        assert!(out.completed && out.converged);
        assert_eq!(out.conflicts, 0);
        assert_eq!(out.txs_per_block_avg, 1.0);
    }
}
