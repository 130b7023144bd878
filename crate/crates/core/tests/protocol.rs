use std::collections::HashSet;

use gossipsim_core::analysis::{self, PushParams};
use gossipsim_core::protocol::{Block, Gossip, GossipMessage, GossipTimer, ProtocolConfig};
use gossipsim_core::simnet::{Event, Network, NetworkConfig, VirtualTime};
use proptest::prelude::*;

fn drive(cfg: ProtocolConfig, seed: u64, blocks: u64, tail_ms: f64) -> (Gossip, Network<GossipMessage, GossipTimer>) {
    let n = cfg.n;
    let mut gossip = Gossip::new(cfg, 0, seed, 1000.0);
    gossip.record_forwards();
    let net_cfg = NetworkConfig { seed, ..NetworkConfig::default() };
    let mut net = Network::new(n, &net_cfg, 1000.0);
    gossip.start(&mut net);
    let step = |gossip: &mut Gossip, net: &mut Network<_, _>, t: f64| {
        net.run_until(VirtualTime::from_ms(t), |net, _, ev| match ev {
            Event::Deliver { from, to, msg } => gossip.handle_message(net, from, to, msg),
            Event::Timer(tm) => gossip.handle_timer(net, tm),
        });
    };
    for seq in 1..=blocks {
        step(&mut gossip, &mut net, seq as f64 * 1500.0);
        gossip.orderer_deliver(&mut net, Block::new(seq, 160_000, Vec::new()));
    }
    step(&mut gossip, &mut net, blocks as f64 * 1500.0 + tail_ms);
    (gossip, net)
}

fn push_only(n: u32, f_out: u32, ttl: u32, ttl_direct: u32) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::enhanced(n, f_out, ttl, ttl_direct);
    cfg.recovery = false;
    cfg.metadata_interval_ms = 0.0;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn enhanced_forwards_are_unique_and_capped(
        seed in any::<u64>(),
        n in 10u32..120,
        f_out in 2u32..6,
        ttl in 1u32..10,
    ) {
        let ttl_direct = ttl.min(2);
        let (gossip, _) = drive(ProtocolConfig::enhanced(n, f_out, ttl, ttl_direct), seed, 3, 45_000.0);
        let log = gossip.forward_log().unwrap();
        let unique: HashSet<_> = log.iter().copied().collect();
        prop_assert_eq!(unique.len(), log.len());
        prop_assert!(log.iter().all(|&(_, _, k)| k <= ttl));
        prop_assert!(gossip.stats().max_counter_sent <= ttl);
        // Recovery closes any gap the push phase leaves within two of its periods.
        prop_assert!(gossip.trace().fully_delivered());
    }

    #[test]
    fn baseline_infects_and_dies(seed in any::<u64>(), n in 10u32..120) {
        let (gossip, _) = drive(ProtocolConfig::baseline(n), seed, 3, 45_000.0);
        let log = gossip.forward_log().unwrap();
        let pairs: HashSet<(u32, u64)> = log.iter().map(|&(p, s, _)| (p, s)).collect();
        prop_assert_eq!(pairs.len(), log.len());
        prop_assert!(gossip.trace().fully_delivered());
    }

    #[test]
    fn push_phase_terminates(seed in any::<u64>(), n in 10u32..80, ttl in 1u32..8) {
        let (_, mut net) = drive(push_only(n, 3, ttl, 1), seed, 2, 0.0);
        let summary = net.run_until(VirtualTime::INFINITY, |_, _, _| {});
        prop_assert!(summary.events_executed < 1_000_000);
        prop_assert_eq!(net.pending(), 0);
    }

    #[test]
    fn bytes_are_conserved(seed in any::<u64>(), n in 10u32..80) {
        let (_, net) = drive(ProtocolConfig::enhanced(n, 3, 6, 2), seed, 2, 15_000.0);
        let t = net.traffic();
        prop_assert_eq!(t.sent_totals().iter().sum::<u64>(), t.received_totals().iter().sum::<u64>());
        prop_assert_eq!(t.payload_sent_totals().iter().sum::<u64>(), t.payload_received_totals().iter().sum::<u64>());
    }
}

#[test]
fn identical_seeds_replay_identically() {
    let run = || {
        let (g, net) = drive(ProtocolConfig::enhanced(100, 4, 9, 2), 42, 5, 15_000.0);
        (g.forward_log().unwrap().to_vec(), g.stats().clone(), net.traffic().sent_totals().to_vec())
    };
    assert_eq!(run(), run());
}

#[test]
fn digest_volume_tracks_the_psi_sum() {
    let blocks = 200;
    let (g, _) = drive(push_only(100, 4, 9, 2), 3, blocks, 5_000.0);
    let p = PushParams::new(100, 4, 9).unwrap();
    let expected = 4.0 * (2..9).map(|i| analysis::psi(i, &p).unwrap()).sum::<f64>();
    let per_block = g.stats().digests_sent as f64 / blocks as f64;
    assert!((per_block - expected).abs() <= 0.05 * expected, "{per_block} vs {expected}");
}

#[test]
fn each_missing_block_is_requested_once_per_peer() {
    let (g, _) = drive(push_only(100, 4, 9, 2), 5, 50, 5_000.0);
    let s = g.stats();
    // Leader's hand-off plus at most one payload per other peer and block.
    assert!(s.digest_requests_sent <= 50 * 99);
    assert_eq!(s.digest_response_sends, s.digest_requests_sent);
}
