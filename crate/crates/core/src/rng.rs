//! Deterministic RNG streams.
//!
//! Every random decision draws from a ChaCha stream selected by
//! `(seed, stream id)`, so results never depend on scheduling or thread
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const BALANCE_STREAM: u64 = 0xBA1A_0000_0000_0000;
pub const SPLIT_STREAM: u64 = 0x5B11_0000_0000_0000;
pub const SCENE_STREAM: u64 = 0x5CE0_0000_0000_0000;

/// Tree `i` of a forest reads stream `i`.
pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
