//! Deterministic RNG stream derivation.
//!
//! Every random draw in the simulator descends from a single scenario seed
//! through SplitMix64 mixing, so runs are reproducible bit-for-bit regardless
//! of worker scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels keeping independent consumers of the scenario seed apart.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Targets,
    Detection,
}

impl Stream {
    fn salt(self) -> u64 {
        match self {
            Stream::Targets => 0x7a52_67a1_9ef8_cc01,
            Stream::Detection => 0xd3c0_11ab_5e77_4e02,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a stream salt and an arbitrary list of indices into one
/// 64-bit value.
pub fn mix(seed: u64, stream: Stream, indices: &[u64]) -> u64 {
    let mut state = seed ^ stream.salt();
    let mut out = splitmix64(&mut state);
    for &i in indices {
        state ^= i.wrapping_mul(0x2545_f491_4f6c_dd1d);
        out ^= splitmix64(&mut state);
    }
    out
}

/// ChaCha8 generator for a derived stream.
pub fn stream_rng(seed: u64, stream: Stream, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream, indices))
}
