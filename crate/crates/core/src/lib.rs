//! Ambiguity-driven optimization of syndrome-measurement circuits for CSS
//! codes, with a detector-error-model toolkit, Monte Carlo evaluation and a
//! zero-noise-extrapolation study harness.

pub mod ambiguity;
pub mod circuit;
pub mod code;
pub mod dem;
pub mod error;
pub mod gf2;
pub mod minweight;
pub mod mutate;
pub mod optimizer;
pub mod sim;
pub mod tableau;
pub mod zne;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for sample `index` of step `step` of a run.
pub fn derive_seed(seed: u64, step: u64, index: u64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [step, index] {
        h = splitmix(h ^ splitmix(v));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
