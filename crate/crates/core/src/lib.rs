//! Block dissemination models for permissioned-blockchain peer networks.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every pure part of
//! the toolkit:
//!
//! - [`analysis`]: expected-infection recursion for TTL-bounded
//!   infect-upon-contagion push, carrying capacity, message-count estimates,
//!   the imperfect-dissemination bound and a minimal-TTL solver.
//! - [`simnet`]: a deterministic discrete-event network with a virtual clock,
//!   FIFO tie-breaking and per-message latency.
//! - [`protocol`]: baseline (push/pull/recovery) and enhanced (TTL push with
//!   digests) gossip state machines.
//! - [`ledger`]: versioned key-value store, endorsement and MVCC validation.
//! - [`metrics`]: receive-time traces, latency CDFs and bandwidth series.
//! - [`montecarlo`] and [`scenario`]: connectivity-only trials and full timed
//!   experiments built on the modules above.
//!
//! File formats, configuration and the command line live in the `gossipsim`
//! crate.

#![no_std]
#![warn(rust_2018_idioms, unused_qualifications)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod ledger;
mod math;
pub mod metrics;
pub mod montecarlo;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod simnet;

pub use analysis::{AnalysisError, Kernel, PushParams};
pub use simnet::{PeerId, VirtualTime};
