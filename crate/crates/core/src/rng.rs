//! Seeded, platform-independent random streams.
//!
//! Every stochastic step in the pipeline draws from a ChaCha stream derived
//! from `(domain, seed)`. Domain separation keeps independent concerns
//! (weight init, training shuffles, image noise, k-means restarts) on
//! unrelated streams even when they share a user-facing seed, which is what
//! makes parallel execution order-independent.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; used to mix seeds and derive sub-stream seeds.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(salt.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A ChaCha8 stream keyed by a domain tag and a seed.
pub fn seeded_rng(domain: &str, seed: u64) -> ChaCha8Rng {
    let d = fnv1a(domain.as_bytes());
    let mut key = [0u8; 32];
    let mut s = mix(d, seed);
    for chunk in key.chunks_mut(8) {
        s = mix(s, 0x5851_f42d_4c95_7f2d);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
