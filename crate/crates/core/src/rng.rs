//! Seed derivation and peer sampling.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer; mixes `seed` and `salt` into an unrelated seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent ChaCha stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `k` distinct peers out of `0..n`, uniformly, never `me`. Returns fewer
/// than `k` only when `n − 1 < k`.
pub fn sample_others<R: Rng + ?Sized>(rng: &mut R, n: u32, me: u32, k: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(k as usize);
    sample_others_into(rng, n, me, k, &mut out);
    out
}

/// [`sample_others`] into a reused buffer (cleared first).
pub fn sample_others_into<R: Rng + ?Sized>(rng: &mut R, n: u32, me: u32, k: u32, out: &mut Vec<u32>) {
    out.clear();
    let pool = n.saturating_sub(1);
    let k = k.min(pool);
    let skip_self = |i: u32| if i >= me { i + 1 } else { i };
    if k <= 16 && u64::from(k) * 4 <= u64::from(pool) {
        // Sequential uniform draws with duplicate rejection.
        while out.len() < k as usize {
            let p = skip_self(rng.gen_range(0..pool));
            if !out.contains(&p) {
                out.push(p);
            }
        }
    } else {
        out.extend(index::sample(rng, pool as usize, k as usize).into_iter().map(|i| skip_self(i as u32)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_excludes_self_and_repeats() {
        let mut rng = stream(7, 0);
        for me in 0..10 {
            for _ in 0..200 {
                let s = sample_others(&mut rng, 10, me, 4);
                assert_eq!(s.len(), 4);
                assert!(!s.contains(&me));
                let mut d = s.clone();
                d.sort_unstable();
                d.dedup();
                assert_eq!(d.len(), 4);
                assert!(s.iter().all(|&p| p < 10));
            }
        }
        assert_eq!(sample_others(&mut rng, 3, 1, 5).len(), 2);
    }

    #[test]
    fn sample_is_uniform() {
        let mut rng = stream(1, 2);
        let mut hits = [0u32; 5];
        for _ in 0..40_000 {
            for p in sample_others(&mut rng, 5, 2, 2) {
                hits[p as usize] += 1;
            }
        }
        assert_eq!(hits[2], 0);
        // each of the 4 others is picked with probability 1/2
        for (i, &h) in hits.iter().enumerate() {
            if i != 2 {
                assert!((19_400..20_600).contains(&h), "{hits:?}");
            }
        }
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream(5, 0).gen();
        let b: u64 = stream(5, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream(5, 0).gen::<u64>());
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
