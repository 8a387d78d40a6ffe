//! Counter-based RNG substreams.
//!
//! Every random quantity in a run is drawn from a stream addressed by
//! `(master seed, path)`, where the path encodes realization / instance /
//! purpose indices. Streams are independent of evaluation order, so parallel
//! and serial sweeps produce identical bytes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; good avalanche for key derivation.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive a deterministic ChaCha stream for `(master, path)`.
pub fn substream(master: u64, path: &[u64]) -> ChaCha12Rng {
    let mut state = mix64(master ^ 0x6A09_E667_F3BC_C909);
    for &word in path {
        state = mix64(state.wrapping_add(GOLDEN).wrapping_add(mix64(word)));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}


/// Derive a child master seed for a nested substream family.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut state = mix64(master ^ 0x6A09_E667_F3BC_C909);
    for &word in path {
        state = mix64(state.wrapping_add(GOLDEN).wrapping_add(mix64(word)));
    }
    mix64(state.wrapping_add(GOLDEN))
}
