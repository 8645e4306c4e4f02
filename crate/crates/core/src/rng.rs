//! Deterministic random streams.
//!
//! Samples are generated in fixed-size chunks. Chunk `k` of a run with master
//! seed `s` draws from ChaCha8 seeded with `s` on stream `k`, so any worker can
//! regenerate any chunk independently and results never depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per independent stream.
pub const CHUNK_LEN: usize = 1024;

pub type Stream = ChaCha8Rng;

pub fn chunk_stream(master_seed: u64, chunk: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(chunk);
    rng
}

/// Seed for the `index`-th independent rerun derived from a master seed (SplitMix64 step).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
