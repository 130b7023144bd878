//! Receive-time traces, latency distributions and bandwidth series.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::simnet::{PeerId, VirtualTime};

/// Idle background traffic of a real deployment (other system tasks),
/// bytes per second per peer. Not simulated; add it when comparing simulated
/// series with measured ones.
pub const IDLE_BACKGROUND_BYTES_PER_SEC: f64 = 400_000.0;

pub const DEFAULT_BUCKET_MS: f64 = 10_000.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounters {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub payload_bytes_sent: u64,
    pub payload_bytes_received: u64,
}

/// Per-peer byte counters, totals and time-bucketed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficRecorder {
    resolution_ms: f64,
    sent: Vec<u64>,
    received: Vec<u64>,
    payload_sent: Vec<u64>,
    payload_received: Vec<u64>,
    buckets: Vec<Vec<BucketCounters>>,
    last_ms: f64,
}

impl TrafficRecorder {
    pub fn new(n_peers: u32, resolution_ms: f64) -> Self {
        assert!(resolution_ms > 0.0);
        let n = n_peers as usize;
        Self {
            resolution_ms,
            sent: vec![0; n],
            received: vec![0; n],
            payload_sent: vec![0; n],
            payload_received: vec![0; n],
            buckets: vec![Vec::new(); n],
            last_ms: 0.0,
        }
    }

    pub fn resolution_ms(&self) -> f64 {
        self.resolution_ms
    }

    pub fn record(&mut self, from: PeerId, to: PeerId, at: VirtualTime, bytes: u64, payload: u64) {
        let (from, to) = (from as usize, to as usize);
        self.sent[from] += bytes;
        self.received[to] += bytes;
        self.payload_sent[from] += payload;
        self.payload_received[to] += payload;
        let b = math::floor(at.as_ms() / self.resolution_ms) as usize;
        let from_bucket = bucket_mut(&mut self.buckets[from], b);
        from_bucket.bytes_sent += bytes;
        from_bucket.payload_bytes_sent += payload;
        let to_bucket = bucket_mut(&mut self.buckets[to], b);
        to_bucket.bytes_received += bytes;
        to_bucket.payload_bytes_received += payload;
        self.last_ms = self.last_ms.max(at.as_ms());
    }

    pub fn n_peers(&self) -> u32 {
        self.sent.len() as u32
    }

    pub fn sent_totals(&self) -> &[u64] {
        &self.sent
    }

    pub fn received_totals(&self) -> &[u64] {
        &self.received
    }

    pub fn payload_sent_totals(&self) -> &[u64] {
        &self.payload_sent
    }

    pub fn payload_received_totals(&self) -> &[u64] {
        &self.payload_received
    }

    pub fn total_bytes(&self) -> u64 {
        self.sent.iter().sum()
    }

    pub fn total_payload_bytes(&self) -> u64 {
        self.payload_sent.iter().sum()
    }

    /// Time of the last recorded delivery.
    pub fn last_ms(&self) -> f64 {
        self.last_ms
    }

    fn bucket(&self, peer: usize, b: usize) -> BucketCounters {
        self.buckets[peer].get(b).copied().unwrap_or_default()
    }
}

fn bucket_mut(buckets: &mut Vec<BucketCounters>, b: usize) -> &mut BucketCounters {
    if buckets.len() <= b {
        buckets.resize(b + 1, BucketCounters::default());
    }
    &mut buckets[b]
}

/// How a peer first obtained a block payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiptSource {
    Orderer,
    Push,
    DigestResponse,
    Pull,
    Recovery,
}

impl ReceiptSource {
    pub const ALL: [Self; 5] = [Self::Orderer, Self::Push, Self::DigestResponse, Self::Pull, Self::Recovery];
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockTrace {
    pub seq: u64,
    pub t_start: VirtualTime,
    receipts: Vec<Option<(VirtualTime, ReceiptSource)>>,
}

impl BlockTrace {
    pub fn receipt(&self, peer: PeerId) -> Option<(VirtualTime, ReceiptSource)> {
        self.receipts[peer as usize]
    }

    /// Latency of `peer` in ms, `None` if it never received the block.
    pub fn latency_ms(&self, peer: PeerId) -> Option<f64> {
        self.receipts[peer as usize].map(|(t, _)| t - self.t_start)
    }

    pub fn delivered(&self) -> usize {
        self.receipts.iter().filter(|r| r.is_some()).count()
    }
}

/// Receive time of every (block, peer) cell plus the traffic counters.
///
/// Block `seq` lives at index `seq − 1`; sequence numbers start at 1 and are
/// consecutive.
#[derive(Clone, Debug, PartialEq)]
pub struct DisseminationTrace {
    n_peers: u32,
    blocks: Vec<BlockTrace>,
    pub traffic: TrafficRecorder,
}

impl DisseminationTrace {
    pub fn new(n_peers: u32, resolution_ms: f64) -> Self {
        Self { n_peers, blocks: Vec::new(), traffic: TrafficRecorder::new(n_peers, resolution_ms) }
    }

    pub fn n_peers(&self) -> u32 {
        self.n_peers
    }

    pub fn blocks(&self) -> &[BlockTrace] {
        &self.blocks
    }

    pub fn block(&self, seq: u64) -> Option<&BlockTrace> {
        seq.checked_sub(1).and_then(|i| self.blocks.get(i as usize))
    }

    /// Latency clock origin for `seq`: the contact peer's receipt from the orderer.
    pub fn record_start(&mut self, seq: u64, t: VirtualTime) {
        assert_eq!(seq, self.blocks.len() as u64 + 1, "blocks must start in sequence");
        self.blocks.push(BlockTrace { seq, t_start: t, receipts: vec![None; self.n_peers as usize] });
    }

    /// Record a payload arrival; returns whether it was the first for this cell.
    /// Panics on a receipt earlier than the block's start.
    pub fn record_receipt(&mut self, seq: u64, peer: PeerId, t: VirtualTime, source: ReceiptSource) -> bool {
        let block = seq
            .checked_sub(1)
            .and_then(|i| self.blocks.get_mut(i as usize))
            .unwrap_or_else(|| panic!("receipt of block {seq} before its dissemination started"));
        assert!(t >= block.t_start, "receipt of block {seq} at {t} precedes its start {}", block.t_start);
        let cell = &mut block.receipts[peer as usize];
        if cell.is_some() {
            return false;
        }
        *cell = Some((t, source));
        true
    }

    /// `(seq, peer)` cells with no receipt.
    pub fn undelivered(&self) -> Vec<(u64, PeerId)> {
        self.blocks
            .iter()
            .flat_map(|b| {
                b.receipts.iter().enumerate().filter(|(_, r)| r.is_none()).map(move |(p, _)| (b.seq, p as PeerId))
            })
            .collect()
    }

    pub fn fully_delivered(&self) -> bool {
        self.blocks.iter().all(|b| b.receipts.iter().all(Option::is_some))
    }

    /// First receipts per source, in [`ReceiptSource::ALL`] order.
    pub fn receipts_by_source(&self) -> [u64; 5] {
        let mut counts = [0u64; 5];
        for b in &self.blocks {
            for (_, s) in b.receipts.iter().flatten() {
                let i = ReceiptSource::ALL.iter().position(|x| x == s).unwrap_or(0);
                counts[i] += 1;
            }
        }
        counts
    }

    /// `(block_seq, peer_id, latency_ms)` for every delivered cell.
    pub fn latency_rows(&self) -> impl Iterator<Item = (u64, PeerId, f64)> + '_ {
        self.blocks.iter().flat_map(|b| (0..self.n_peers).filter_map(move |p| b.latency_ms(p).map(|l| (b.seq, p, l))))
    }
}

/// Empirical CDF over an expected population of `population` samples, of
/// which only the delivered ones appear as points. The final probability is
/// `delivered / population`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    pub population: usize,
    /// `(latency_ms, cumulative probability)`, sorted.
    pub points: Vec<(f64, f64)>,
}

impl Cdf {
    pub fn new(mut samples: Vec<f64>, population: usize) -> Self {
        assert!(samples.len() <= population);
        samples.sort_by(f64::total_cmp);
        let pop = population as f64;
        let points = samples.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / pop)).collect();
        Self { population, points }
    }

    /// Smallest sample with cumulative probability ≥ `q`; `None` when the
    /// quantile falls among undelivered samples.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let rank = math::ceil(q * self.population as f64).max(1.0) as usize;
        self.points.get(rank - 1).map(|p| p.0)
    }

    pub fn percentiles(&self) -> Percentiles {
        Percentiles {
            p50: self.quantile(0.50),
            p95: self.quantile(0.95),
            p99: self.quantile(0.99),
            p100: self.quantile(1.0),
        }
    }

    pub fn max(&self) -> Option<f64> {
        self.points.last().map(|p| p.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: Option<f64>,
    pub p95: Option<f64>,
    pub p99: Option<f64>,
    pub p100: Option<f64>,
}

/// Latency distribution of one peer (over blocks) or one block (over peers).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    /// Peer id or block sequence number.
    pub id: u64,
    pub delivered: usize,
    pub mean_ms: Option<f64>,
    pub percentiles: Percentiles,
    #[serde(skip)]
    sum_ms: f64,
    #[serde(skip)]
    cdf: Cdf,
}

impl SeriesStats {
    fn new(id: u64, samples: Vec<f64>, population: usize) -> Self {
        let sum_ms: f64 = samples.iter().sum();
        let delivered = samples.len();
        let cdf = Cdf::new(samples, population);
        Self {
            id,
            delivered,
            mean_ms: (delivered > 0).then(|| sum_ms / delivered as f64),
            percentiles: cdf.percentiles(),
            sum_ms,
            cdf,
        }
    }

    pub fn cdf(&self) -> &Cdf {
        &self.cdf
    }
}

/// Fastest, median and slowest series by mean latency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub fastest: u64,
    pub median: u64,
    pub slowest: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub peers: Vec<SeriesStats>,
    pub blocks: Vec<SeriesStats>,
    pub peer_extremes: Option<Extremes>,
    pub block_extremes: Option<Extremes>,
    /// Over every delivered cell.
    pub overall: Percentiles,
    pub overall_mean_ms: Option<f64>,
    pub max_block_latency_ms: Option<f64>,
    pub undelivered: usize,
}

impl LatencySummary {
    /// Global mean computed from the per-peer view.
    pub fn mean_from_peers(&self) -> Option<f64> {
        mean_of(&self.peers)
    }

    /// Global mean computed from the per-block view.
    pub fn mean_from_blocks(&self) -> Option<f64> {
        mean_of(&self.blocks)
    }

    pub fn peer(&self, id: PeerId) -> Option<&SeriesStats> {
        self.peers.iter().find(|s| s.id == u64::from(id))
    }

    pub fn block(&self, seq: u64) -> Option<&SeriesStats> {
        self.blocks.iter().find(|s| s.id == seq)
    }
}

fn mean_of(series: &[SeriesStats]) -> Option<f64> {
    let count: usize = series.iter().map(|s| s.delivered).sum();
    let sum: f64 = series.iter().map(|s| s.sum_ms).sum();
    (count > 0).then(|| sum / count as f64)
}

fn extremes(series: &[SeriesStats]) -> Option<Extremes> {
    let mut ranked: Vec<(f64, u64)> = series.iter().filter_map(|s| s.mean_ms.map(|m| (m, s.id))).collect();
    if ranked.is_empty() {
        return None;
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Some(Extremes {
        fastest: ranked[0].1,
        median: ranked[(ranked.len() - 1) / 2].1,
        slowest: ranked[ranked.len() - 1].1,
    })
}

/// Peer-level and block-level latency distributions of a finished trace.
pub fn latency_cdfs(trace: &DisseminationTrace) -> LatencySummary {
    let n = trace.n_peers();
    let n_blocks = trace.blocks().len();

    let mut per_peer: Vec<Vec<f64>> = vec![Vec::with_capacity(n_blocks); n as usize];
    let mut all = Vec::new();
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in trace.blocks() {
        let mut samples = Vec::with_capacity(n as usize);
        for p in 0..n {
            if let Some(l) = b.latency_ms(p) {
                samples.push(l);
                per_peer[p as usize].push(l);
                all.push(l);
            }
        }
        blocks.push(SeriesStats::new(b.seq, samples, n as usize));
    }
    let peers: Vec<SeriesStats> =
        per_peer.into_iter().enumerate().map(|(p, samples)| SeriesStats::new(p as u64, samples, n_blocks)).collect();

    let population = n as usize * n_blocks;
    let undelivered = population - all.len();
    let overall = Cdf::new(all, population);
    let mut summary = LatencySummary {
        peer_extremes: extremes(&peers),
        block_extremes: extremes(&blocks),
        overall: overall.percentiles(),
        overall_mean_ms: None,
        max_block_latency_ms: overall.max(),
        undelivered,
        peers,
        blocks,
    };
    summary.overall_mean_ms = summary.mean_from_blocks();
    summary
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthBucket {
    pub start_ms: f64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub payload_bytes_sent: u64,
    pub sent_bytes_per_sec: f64,
    pub received_bytes_per_sec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeerBandwidth {
    pub peer: PeerId,
    pub buckets: Vec<BandwidthBucket>,
    pub mean_sent_bytes_per_sec: f64,
    pub mean_received_bytes_per_sec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSeries {
    pub bucket_ms: f64,
    pub duration_ms: f64,
    pub peers: Vec<PeerBandwidth>,
    /// Network-wide sums per bucket.
    pub total: Vec<BandwidthBucket>,
}

/// Bytes per second per `bucket_ms` window for every peer, covering
/// `[0, duration_ms)` rounded up to whole buckets. `bucket_ms` must be a
/// whole multiple of the recorder's resolution.
pub fn bandwidth_series(traffic: &TrafficRecorder, bucket_ms: f64, duration_ms: f64) -> BandwidthSeries {
    let ratio = bucket_ms / traffic.resolution_ms();
    let per = math::floor(ratio + 0.5) as usize;
    assert!(
        per >= 1 && (ratio - per as f64).abs() < 1e-9,
        "bucket {bucket_ms} ms is not a multiple of the {} ms resolution",
        traffic.resolution_ms()
    );
    let n_buckets = (math::ceil(duration_ms.max(traffic.last_ms()) / bucket_ms) as usize).max(1);
    let bucket_secs = bucket_ms / 1000.0;
    let duration_ms = n_buckets as f64 * bucket_ms;

    let mut total: Vec<BandwidthBucket> = (0..n_buckets)
        .map(|b| BandwidthBucket {
            start_ms: b as f64 * bucket_ms,
            bytes_sent: 0,
            bytes_received: 0,
            payload_bytes_sent: 0,
            sent_bytes_per_sec: 0.0,
            received_bytes_per_sec: 0.0,
        })
        .collect();
    let mut peers = Vec::with_capacity(traffic.n_peers() as usize);
    for p in 0..traffic.n_peers() as usize {
        let mut buckets = Vec::with_capacity(n_buckets);
        for (b, tot) in total.iter_mut().enumerate() {
            let mut c = BucketCounters::default();
            for fine in b * per..(b + 1) * per {
                let f = traffic.bucket(p, fine);
                c.bytes_sent += f.bytes_sent;
                c.bytes_received += f.bytes_received;
                c.payload_bytes_sent += f.payload_bytes_sent;
            }
            tot.bytes_sent += c.bytes_sent;
            tot.bytes_received += c.bytes_received;
            tot.payload_bytes_sent += c.payload_bytes_sent;
            buckets.push(BandwidthBucket {
                start_ms: b as f64 * bucket_ms,
                bytes_sent: c.bytes_sent,
                bytes_received: c.bytes_received,
                payload_bytes_sent: c.payload_bytes_sent,
                sent_bytes_per_sec: c.bytes_sent as f64 / bucket_secs,
                received_bytes_per_sec: c.bytes_received as f64 / bucket_secs,
            });
        }
        let mean = |f: fn(&BandwidthBucket) -> f64| buckets.iter().map(f).sum::<f64>() / n_buckets as f64;
        peers.push(PeerBandwidth {
            peer: p as PeerId,
            mean_sent_bytes_per_sec: mean(|b| b.sent_bytes_per_sec),
            mean_received_bytes_per_sec: mean(|b| b.received_bytes_per_sec),
            buckets,
        });
    }
    for tot in &mut total {
        tot.sent_bytes_per_sec = tot.bytes_sent as f64 / bucket_secs;
        tot.received_bytes_per_sec = tot.bytes_received as f64 / bucket_secs;
    }
    BandwidthSeries { bucket_ms, duration_ms, peers, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(ms: f64) -> VirtualTime {
        VirtualTime::from_ms(ms)
    }

    #[test]
    fn initial_peer_has_zero_latency() {
        let mut tr = DisseminationTrace::new(3, 1000.0);
        tr.record_start(1, t(100.0));
        assert!(tr.record_receipt(1, 0, t(100.0), ReceiptSource::Orderer));
        assert_eq!(tr.block(1).unwrap().latency_ms(0), Some(0.0));
    }

    #[test]
    fn duplicate_receipt_keeps_first_time_but_bytes_grow() {
        let mut tr = DisseminationTrace::new(2, 1000.0);
        tr.record_start(1, t(0.0));
        tr.traffic.record(0, 1, t(5.0), 1000, 1000);
        assert!(tr.record_receipt(1, 1, t(5.0), ReceiptSource::Push));
        tr.traffic.record(0, 1, t(9.0), 1000, 1000);
        assert!(!tr.record_receipt(1, 1, t(9.0), ReceiptSource::Push));
        assert_eq!(tr.block(1).unwrap().latency_ms(1), Some(5.0));
        assert_eq!(tr.traffic.received_totals()[1], 2000);
    }

    #[test]
    #[should_panic(expected = "precedes its start")]
    fn receipt_before_start_is_fatal() {
        let mut tr = DisseminationTrace::new(2, 1000.0);
        tr.record_start(1, t(10.0));
        tr.record_receipt(1, 1, t(9.0), ReceiptSource::Push);
    }

    #[test]
    fn missing_cell_caps_cdf() {
        let mut tr = DisseminationTrace::new(4, 1000.0);
        tr.record_start(1, t(0.0));
        for p in 0..3 {
            tr.record_receipt(1, p, t(f64::from(p)), ReceiptSource::Push);
        }
        let s = latency_cdfs(&tr);
        assert_eq!(s.undelivered, 1);
        assert_eq!(tr.undelivered(), vec![(1, 3)]);
        let cdf = s.block(1).unwrap().cdf();
        assert_eq!(cdf.points.last().unwrap().1, 0.75);
        assert_eq!(s.block(1).unwrap().percentiles.p100, None);
        assert_eq!(s.block(1).unwrap().percentiles.p50, Some(1.0));
    }

    #[test]
    fn single_peer_single_block() {
        let mut tr = DisseminationTrace::new(1, 1000.0);
        tr.record_start(1, t(3.0));
        tr.record_receipt(1, 0, t(3.0), ReceiptSource::Orderer);
        let s = latency_cdfs(&tr);
        assert_eq!(s.blocks[0].cdf().points, vec![(0.0, 1.0)]);
        assert_eq!(s.peers[0].cdf().points, vec![(0.0, 1.0)]);
        assert_eq!(s.max_block_latency_ms, Some(0.0));
    }

    #[test]
    fn extremes_pick_by_mean() {
        let mut tr = DisseminationTrace::new(3, 1000.0);
        for seq in 1..=3 {
            tr.record_start(seq, t(0.0));
            for p in 0..3 {
                tr.record_receipt(seq, p, t(f64::from(p) * 10.0 + seq as f64), ReceiptSource::Push);
            }
        }
        let s = latency_cdfs(&tr);
        let pe = s.peer_extremes.unwrap();
        assert_eq!((pe.fastest, pe.median, pe.slowest), (0, 1, 2));
        let be = s.block_extremes.unwrap();
        assert_eq!((be.fastest, be.median, be.slowest), (1, 2, 3));
    }

    #[test]
    fn idle_network_has_zero_bandwidth() {
        let rec = TrafficRecorder::new(3, 1000.0);
        let s = bandwidth_series(&rec, 10_000.0, 50_000.0);
        assert_eq!(s.total.len(), 5);
        assert!(s.total.iter().all(|b| b.bytes_sent == 0));
        assert!(s.peers.iter().all(|p| p.mean_sent_bytes_per_sec == 0.0));
    }

    #[test]
    fn bucket_aggregation() {
        let mut rec = TrafficRecorder::new(2, 1000.0);
        rec.record(0, 1, t(500.0), 100, 80);
        rec.record(0, 1, t(9_999.0), 100, 0);
        rec.record(1, 0, t(10_000.0), 40, 0);
        let s = bandwidth_series(&rec, 10_000.0, 20_000.0);
        assert_eq!(s.peers[0].buckets[0].bytes_sent, 200);
        assert_eq!(s.peers[0].buckets[0].payload_bytes_sent, 80);
        assert_eq!(s.peers[0].buckets[0].sent_bytes_per_sec, 20.0);
        assert_eq!(s.peers[0].buckets[1].bytes_received, 40);
        assert_eq!(s.total[1].bytes_sent, 40);
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_views_agree(
            cells in proptest::collection::vec(proptest::option::of(0.0f64..5000.0), 1..120),
            n in 1u32..8,
        ) {
            let n_blocks = cells.len().div_ceil(n as usize);
            let mut tr = DisseminationTrace::new(n, 1000.0);
            for seq in 1..=n_blocks as u64 {
                tr.record_start(seq, t(100.0));
            }
            for (i, c) in cells.iter().enumerate() {
                if let Some(l) = c {
                    let seq = (i / n as usize) as u64 + 1;
                    tr.record_receipt(seq, (i % n as usize) as u32, t(100.0 + l), ReceiptSource::Push);
                }
            }
            let s = latency_cdfs(&tr);
            for series in s.peers.iter().chain(&s.blocks) {
                let pts = &series.cdf().points;
                for w in pts.windows(2) {
                    prop_assert!(w[0].0 <= w[1].0 && w[0].1 < w[1].1);
                }
                if let Some(last) = pts.last() {
                    prop_assert!(last.1 <= 1.0);
                    prop_assert_eq!(last.1 == 1.0, series.delivered == series.cdf().population);
                }
            }
            match (s.mean_from_peers(), s.mean_from_blocks()) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0)),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn bucket_means_match_totals(
            msgs in proptest::collection::vec((0u32..4, 0u32..4, 0.0f64..95_000.0, 1u64..100_000), 0..200),
        ) {
            let mut rec = TrafficRecorder::new(4, 1000.0);
            for &(a, b, at, bytes) in &msgs {
                rec.record(a, b, t(at), bytes, bytes / 2);
            }
            let s = bandwidth_series(&rec, 10_000.0, 100_000.0);
            let secs = s.duration_ms / 1000.0;
            for p in &s.peers {
                let total = rec.sent_totals()[p.peer as usize] as f64;
                prop_assert!((p.mean_sent_bytes_per_sec - total / secs).abs() <= 1e-9 * total.max(1.0));
            }
            let sent: u64 = s.total.iter().map(|b| b.bytes_sent).sum();
            let received: u64 = s.total.iter().map(|b| b.bytes_received).sum();
            prop_assert_eq!(sent, received);
        }
    }
}
