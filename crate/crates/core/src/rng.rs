//! Deterministic random-stream derivation.
//!
//! Every stochastic component draws from its own ChaCha substream whose seed
//! is derived from `(base_seed, context words)` with a SplitMix64 chain.
//! Keeping purposes on separate substreams means toggling one stochastic
//! feature (say, the AGC policy) never shifts the draws of another (say, the
//! noise), which is what makes emulation runs comparable across configs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for per-packet substreams of the receiver model.
pub mod purpose {
    pub const AGC: u64 = 1;
    pub const RAMP: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const OUTLIER: u64 = 4;
    pub const DROP: u64 = 5;
    pub const PROFILE: u64 = 6;
    pub const JITTER: u64 = 7;
    pub const SHUFFLE: u64 = 8;
    pub const BOOTSTRAP: u64 = 9;
    pub const DATASET: u64 = 10;
}

/// One SplitMix64 step: advances the state and returns the next word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a list of context words.
///
/// The derivation folds each word through SplitMix64, so nearby contexts
/// (`seq`, `seq + 1`) produce statistically unrelated seeds.
pub fn derive_seed(base: u64, context: &[u64]) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for &word in context {
        state ^= word.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        out = splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 RNG seeded for one `(base, context)` substream.
pub fn substream(base: u64, context: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, context))
}
