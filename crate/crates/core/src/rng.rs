//! Reproducible random streams.
//!
//! Every replica owns an independent ChaCha8 stream. The key is the 64-bit
//! master seed expanded by `SeedableRng::seed_from_u64` (PCG32 expansion, as
//! fixed by `rand_core`), and the 64-bit ChaCha stream id is the replica
//! index. The word position always starts at zero. A replica's draws are
//! therefore a pure function of `(master_seed, replica)`, independent of the
//! order in which replicas are scheduled or of the worker count.
//!
//! Auxiliary streams (calibration batches, permutation tests, quantile
//! estimates) use [`derive_seed`] to obtain a fresh master seed from a
//! parent seed and a tag, so they never share a key with the main batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// The stream for replica `replica` of a batch keyed by `master_seed`.
pub fn replica_rng(master_seed: u64, replica: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Master seed of a child batch, derived from the parent seed and a tag.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Stable tags for the auxiliary streams used inside the crate.
pub mod tags {
    pub const CALIBRATION: u64 = 1;
    pub const PERMUTATION: u64 = 2;
    pub const QUANTILE: u64 = 3;
    pub const RHS: u64 = 4;
    pub const REFERENCE: u64 = 5;
}
