//! Deterministic seed derivation.
//!
//! Every random draw in the pipeline comes from a ChaCha stream whose seed is
//! derived from `(global seed, record index, stage tag)` with a splitmix64
//! mixer, so any record can be regenerated on its own and parallel workers
//! never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Stage tags keep the streams of different pipeline stages disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Room = 0x524f_4f4d,
    Speech = 0x5350_4348,
    Noise = 0x4e4f_4953,
    Codec = 0x434f_4445,
    Plan = 0x504c_414e,
    Init = 0x494e_4954,
    Episode = 0x4550_4953,
    Dropout = 0x4452_4f50,
    Validation = 0x5641_4c49,
    Evaluation = 0x4556_414c,
}

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a global seed with a record index and a stage tag.
pub fn derive(global: u64, index: u64, stage: Stage) -> u64 {
    let a = splitmix64(global);
    let b = splitmix64(a ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(b ^ stage as u64)
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(global: u64, index: u64, stage: Stage) -> Rng {
    rng_from(derive(global, index, stage))
}
