//! Seeded random streams. Every stochastic component derives its generator
//! from a user seed plus a fixed stream tag so results never depend on call
//! order elsewhere in the program.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`; distinct streams are statistically
/// independent for the same seed.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub mod tags {
    pub const INIT_BRANCH1: u64 = 1;
    pub const INIT_BRANCH2: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const SUBSET: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const FOLDS: u64 = 6;
    pub const CLASSIFIER: u64 = 7;
    pub const INIT_ENCODER: u64 = 8;
    pub const INIT_DECODER: u64 = 9;
    pub const BENCH: u64 = 10;
}
