//! Deterministic, platform-independent RNG stream derivation.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! (master seed, domain label, numeric parts). Identical inputs yield
//! identical streams on every platform, which is what makes whole runs
//! byte-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, used to hash string identifiers (e.g. link ids) into stream parts.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha stream from (seed, domain, parts).
pub fn derive_rng(seed: u64, domain: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ fnv1a64(domain.as_bytes());
    for &p in parts {
        state ^= splitmix64(&mut state) ^ p;
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
