//! Keyed random streams.
//!
//! Every consumer of randomness (an initializer, one epoch of dropout, one
//! epoch of batch shuffling) gets its own ChaCha stream derived from the run
//! seed and a fixed tag path, so phases never perturb each other's draws and
//! a run resumed from a checkpoint replays the exact same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod tag {
    pub const KB_INIT: u64 = 1;
    pub const AC_INIT: u64 = 2;
    pub const AC_HEAD_INIT: u64 = 3;
    pub const HEAD_INIT: u64 = 4;
    pub const TASK_EMB_INIT: u64 = 5;
    pub const MCL_DROPOUT: u64 = 6;
    pub const AC_DROPOUT: u64 = 7;
    pub const MCL_BATCHES: u64 = 8;
    pub const AC_BATCHES: u64 = 9;
    pub const EMBEDDINGS: u64 = 10;
    pub const SPLIT: u64 = 11;
    pub const SYNTHETIC: u64 = 12;
    pub const ORDERS: u64 = 13;
    pub const SEQUENCE: u64 = 14;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn stream(seed: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
