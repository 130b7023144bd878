//! Execute-order-validate consistency model.
//!
//! A single endorser simulates each increment against its local
//! [`VersionedStore`], recording the version it read. Peers later validate
//! blocks in ledger order: a transaction commits only if every version in its
//! read set still matches, so of two increments built on the same base value
//! only the first one ordered takes effect.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::simnet::VirtualTime;

pub type Key = u32;
pub type Version = u64;
pub type TxId = u64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub read_set: BTreeMap<Key, Version>,
    pub write_set: BTreeMap<Key, i64>,
}

/// Key → (value, version). Absent keys read as `(0, 0)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionedStore {
    entries: BTreeMap<Key, (i64, Version)>,
}

impl VersionedStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// `n_keys` keys, each at value 0 and version 0.
    pub fn with_keys(n_keys: u32) -> Self {
        Self { entries: (0..n_keys).map(|k| (k, (0, 0))).collect() }
    }

    pub fn get(&self, key: Key) -> (i64, Version) {
        self.entries.get(&key).copied().unwrap_or((0, 0))
    }

    pub fn version(&self, key: Key) -> Version {
        self.get(key).1
    }

    /// Write each value and bump its key's version by one.
    pub fn apply(&mut self, write_set: &BTreeMap<Key, i64>) {
        for (&k, &v) in write_set {
            let e = self.entries.entry(k).or_insert((0, 0));
            *e = (v, e.1 + 1);
        }
    }

    pub fn matches(&self, read_set: &BTreeMap<Key, Version>) -> bool {
        read_set.iter().all(|(&k, &v)| self.version(k) == v)
    }

    pub fn sum_values(&self) -> i64 {
        self.entries.values().map(|e| e.0).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Key, i64, Version)> + '_ {
        self.entries.iter().map(|(&k, &(v, ver))| (k, v, ver))
    }
}

/// A client request to increment `key`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxIntent {
    pub id: TxId,
    pub key: Key,
}

/// Simulate an increment: read the key's current value and version, write
/// value + 1.
pub fn endorse(intent: TxIntent, store: &VersionedStore) -> Transaction {
    let (value, version) = store.get(intent.key);
    Transaction {
        id: intent.id,
        read_set: BTreeMap::from([(intent.key, version)]),
        write_set: BTreeMap::from([(intent.key, value + 1)]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Valid,
    Conflicted,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub statuses: Vec<TxStatus>,
    pub conflicts: u64,
}

/// Validate `txs` in order against `store`, applying the valid ones.
/// Conflicted transactions stay in the block but change nothing.
pub fn validate_transactions(txs: &[Transaction], store: &mut VersionedStore) -> ValidationResult {
    let mut result = ValidationResult { statuses: Vec::with_capacity(txs.len()), conflicts: 0 };
    for tx in txs {
        if store.matches(&tx.read_set) {
            store.apply(&tx.write_set);
            result.statuses.push(TxStatus::Valid);
        } else {
            result.conflicts += 1;
            result.statuses.push(TxStatus::Conflicted);
        }
    }
    result
}

/// A ledger replica: store plus the running tally of its validation decisions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Replica {
    pub store: VersionedStore,
    pub height: u64,
    pub valid: u64,
    pub conflicts: u64,
}

impl Replica {
    pub fn new(n_keys: u32) -> Self {
        Self { store: VersionedStore::with_keys(n_keys), ..Self::default() }
    }

    /// Validate the block at `height + 1`.
    pub fn validate_block(&mut self, block: &crate::protocol::Block) -> ValidationResult {
        assert_eq!(block.seq, self.height + 1, "blocks must be validated in ledger order");
        let result = validate_transactions(&block.txs, &mut self.store);
        self.height = block.seq;
        self.conflicts += result.conflicts;
        self.valid += result.statuses.len() as u64 - result.conflicts;
        result
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadParams {
    pub n_keys: u32,
    pub rounds: u32,
    pub rate_tx_per_s: f64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self { n_keys: 100, rounds: 100, rate_tx_per_s: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledIntent {
    pub at: VirtualTime,
    pub intent: TxIntent,
}

/// `rounds` rounds, each a fresh permutation of the keys, submitted on a
/// fixed cadence of `1/rate` seconds. Conflicted transactions are not resent.
pub fn increment_workload(params: &WorkloadParams, seed: u64) -> Vec<ScheduledIntent> {
    assert!(params.rate_tx_per_s > 0.0, "rate must be positive");
    let mut rng = rng::stream(seed, u64::MAX);
    let spacing_ms = 1000.0 / params.rate_tx_per_s;
    let mut keys: Vec<Key> = (0..params.n_keys).collect();
    let mut out = Vec::with_capacity((params.n_keys * params.rounds) as usize);
    for _ in 0..params.rounds {
        keys.shuffle(&mut rng);
        for &key in &keys {
            let id = out.len() as TxId;
            out.push(ScheduledIntent {
                at: VirtualTime::from_ms(id as f64 * spacing_ms),
                intent: TxIntent { id, key },
            });
        }
    }
    out
}

/// What the block producer wants after an input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProducerAction {
    Nothing,
    /// Fire [`BlockProducer::on_timer`] with this epoch at the given time.
    ArmTimer {
        at: VirtualTime,
        epoch: u64,
    },
    /// A block's worth of transactions, in submission order.
    Cut(Vec<Transaction>),
}

/// Ordering-service stub: cuts a block when `max_txs` transactions are
/// buffered or `timer_ms` after the first buffered one arrived. Performs no
/// validation and never emits empty blocks.
#[derive(Clone, Debug)]
pub struct BlockProducer {
    timer_ms: f64,
    max_txs: usize,
    buffer: Vec<Transaction>,
    epoch: u64,
}

impl BlockProducer {
    pub fn new(timer_ms: f64, max_txs: usize) -> Self {
        assert!(timer_ms >= 0.0 && max_txs >= 1);
        Self { timer_ms, max_txs, buffer: Vec::new(), epoch: 0 }
    }

    pub fn submit(&mut self, tx: Transaction, now: VirtualTime) -> ProducerAction {
        let first = self.buffer.is_empty();
        self.buffer.push(tx);
        if self.buffer.len() >= self.max_txs {
            return ProducerAction::Cut(self.cut());
        }
        if first {
            ProducerAction::ArmTimer { at: now + self.timer_ms, epoch: self.epoch }
        } else {
            ProducerAction::Nothing
        }
    }

    /// Timer expiry; stale epochs (the block was already cut) are ignored.
    pub fn on_timer(&mut self, epoch: u64) -> Option<Vec<Transaction>> {
        (epoch == self.epoch && !self.buffer.is_empty()).then(|| self.cut())
    }

    pub fn pending(&self) -> usize {
        self.buffer.len()
    }

    fn cut(&mut self) -> Vec<Transaction> {
        self.epoch += 1;
        core::mem::take(&mut self.buffer)
    }
}
