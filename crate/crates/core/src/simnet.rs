//! Deterministic discrete-event network.
//!
//! A [`Network`] owns the virtual clock, the pending-event queue and the
//! latency model. Events at equal times run in insertion order, and every
//! random draw comes from a seeded ChaCha stream, so a run is a pure function
//! of its seed and configuration.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::TrafficRecorder;
use crate::rng::{self, SimRng};

pub type PeerId = u32;

/// Milliseconds since the start of the simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VirtualTime(f64);

impl VirtualTime {
    pub const ZERO: Self = Self(0.0);
    pub const INFINITY: Self = Self(f64::INFINITY);

    pub fn from_ms(ms: f64) -> Self {
        assert!(ms >= 0.0, "virtual time must be nonnegative, got {ms}");
        Self(ms)
    }

    pub fn from_secs(secs: f64) -> Self {
        Self::from_ms(secs * 1000.0)
    }

    pub fn as_ms(self) -> f64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 / 1000.0
    }
}

impl Eq for VirtualTime {}

impl PartialOrd for VirtualTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VirtualTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for VirtualTime {
    type Output = Self;

    fn add(self, ms: f64) -> Self {
        Self::from_ms(self.0 + ms)
    }
}

impl Sub for VirtualTime {
    type Output = f64;

    fn sub(self, rhs: Self) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for VirtualTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.0)
    }
}

/// Per-message delay: `base_ms + per_byte_us·size/1000 + U(0, jitter_ms)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub base_ms: f64,
    /// Microseconds per byte; 0.008 is 1 Gbps.
    pub per_byte_us: f64,
    pub jitter_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self { base_ms: 0.5, per_byte_us: 0.008, jitter_ms: 0.2 }
    }
}

impl LatencyModel {
    /// Everything arrives at the instant it is sent.
    pub const INSTANT: Self = Self { base_ms: 0.0, per_byte_us: 0.0, jitter_ms: 0.0 };

    pub fn is_valid(&self) -> bool {
        [self.base_ms, self.per_byte_us, self.jitter_ms].iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Delay without jitter.
    pub fn fixed_delay_ms(&self, size_bytes: u64) -> f64 {
        self.base_ms + self.per_byte_us * size_bytes as f64 / 1000.0
    }

    pub fn delay_ms<R: Rng + ?Sized>(&self, size_bytes: u64, rng: &mut R) -> f64 {
        let jitter = if self.jitter_ms > 0.0 { rng.gen_range(0.0..self.jitter_ms) } else { 0.0 };
        self.fixed_delay_ms(size_bytes) + jitter
    }
}

/// Byte accounting for wire messages.
pub trait WireSize {
    fn wire_bytes(&self) -> u64;

    /// Bytes of block payload carried, for payload-only counters.
    fn payload_bytes(&self) -> u64 {
        0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event<M, T> {
    Deliver { from: PeerId, to: PeerId, msg: M },
    Timer(T),
}

struct Scheduled<E> {
    at: VirtualTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed: BinaryHeap is a max-heap and the earliest (time, seq) must pop first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-queue on `(time, insertion sequence)`.
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), next_seq: 0 }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at: VirtualTime, event: E) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, event });
    }

    pub fn pop(&mut self) -> Option<(VirtualTime, E)> {
        self.heap.pop().map(|s| (s.at, s.event))
    }

    pub fn peek_time(&self) -> Option<VirtualTime> {
        self.heap.peek().map(|s| s.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub latency: LatencyModel,
    #[serde(default)]
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { latency: LatencyModel::default(), drop_probability: 0.0, seed: 0 }
    }
}

/// What [`Network::run_until`] reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub final_time: VirtualTime,
    pub events_executed: u64,
    pub bytes_sent: Vec<u64>,
    pub bytes_received: Vec<u64>,
    pub messages_delivered: u64,
    pub messages_dropped: u64,
}

/// The engine: clock, queue, latency and traffic counters for `n_peers`
/// peers exchanging messages `M` and firing timers `T`.
pub struct Network<M, T> {
    clock: VirtualTime,
    queue: EventQueue<Event<M, T>>,
    latency: LatencyModel,
    drop_probability: f64,
    rng: SimRng,
    traffic: TrafficRecorder,
    n_peers: u32,
    events_executed: u64,
    messages_delivered: u64,
    messages_dropped: u64,
}

impl<M: WireSize, T> Network<M, T> {
    pub fn new(n_peers: u32, config: &NetworkConfig, bucket_ms: f64) -> Self {
        assert!(config.latency.is_valid(), "invalid latency model {:?}", config.latency);
        assert!((0.0..=1.0).contains(&config.drop_probability));
        Self {
            clock: VirtualTime::ZERO,
            queue: EventQueue::new(),
            latency: config.latency,
            drop_probability: config.drop_probability,
            // Stream 0 of the seed belongs to the network; peers use 1..=n.
            rng: rng::stream(config.seed, 0),
            traffic: TrafficRecorder::new(n_peers, bucket_ms),
            n_peers,
            events_executed: 0,
            messages_delivered: 0,
            messages_dropped: 0,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.clock
    }

    pub fn n_peers(&self) -> u32 {
        self.n_peers
    }

    pub fn latency(&self) -> &LatencyModel {
        &self.latency
    }

    pub fn traffic(&self) -> &TrafficRecorder {
        &self.traffic
    }

    pub fn into_traffic(self) -> TrafficRecorder {
        self.traffic
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Enqueue a timer. Panics if `at` lies in the past.
    pub fn schedule(&mut self, at: VirtualTime, timer: T) {
        self.push(at, Event::Timer(timer));
    }

    pub fn schedule_in(&mut self, delay_ms: f64, timer: T) {
        let at = self.clock + delay_ms;
        self.schedule(at, timer);
    }

    fn push(&mut self, at: VirtualTime, event: Event<M, T>) {
        assert!(at >= self.clock, "event scheduled in the past: {at} < clock {}", self.clock);
        self.queue.push(at, event);
    }

    /// Schedule delivery of `msg` after the latency-model delay. Bytes are
    /// counted for both ends when the message is delivered.
    pub fn send(&mut self, from: PeerId, to: PeerId, msg: M) {
        debug_assert!(from < self.n_peers && to < self.n_peers, "unknown peer");
        if self.drop_probability > 0.0 && self.rng.gen_bool(self.drop_probability) {
            self.messages_dropped += 1;
            return;
        }
        let delay = self.latency.delay_ms(msg.wire_bytes(), &mut self.rng);
        let at = self.clock + delay;
        self.push(at, Event::Deliver { from, to, msg });
    }

    /// Delay for a message of `size_bytes` on a link outside the peer
    /// network (client, orderer), drawn from the same model.
    pub fn sample_delay(&mut self, size_bytes: u64) -> f64 {
        self.latency.delay_ms(size_bytes, &mut self.rng)
    }

    /// Pop the next event if it is due at or before `t_end`, advancing the
    /// clock and recording traffic for deliveries.
    pub fn next_event(&mut self, t_end: VirtualTime) -> Option<(VirtualTime, Event<M, T>)> {
        if self.queue.peek_time()? > t_end {
            return None;
        }
        let (at, event) = self.queue.pop()?;
        debug_assert!(at >= self.clock);
        self.clock = at;
        self.events_executed += 1;
        if let Event::Deliver { from, to, msg } = &event {
            self.messages_delivered += 1;
            self.traffic.record(*from, *to, at, msg.wire_bytes(), msg.payload_bytes());
        }
        Some((at, event))
    }

    /// Execute every event due at or before `t_end` in order.
    pub fn run_until<F>(&mut self, t_end: VirtualTime, mut handler: F) -> SimulationSummary
    where
        F: FnMut(&mut Self, VirtualTime, Event<M, T>),
    {
        while let Some((at, event)) = self.next_event(t_end) {
            handler(self, at, event);
        }
        if t_end != VirtualTime::INFINITY && t_end > self.clock {
            self.clock = t_end;
        }
        self.summary()
    }

    pub fn summary(&self) -> SimulationSummary {
        SimulationSummary {
            final_time: self.clock,
            events_executed: self.events_executed,
            bytes_sent: self.traffic.sent_totals().to_vec(),
            bytes_received: self.traffic.received_totals().to_vec(),
            messages_delivered: self.messages_delivered,
            messages_dropped: self.messages_dropped,
        }
    }
}
