//! Seed-derived random streams. Replicas never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags keep the streams of different experiment sides apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Population = 1,
    Tilted = 2,
    Spine = 3,
    Motion = 4,
    Sampling = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, replica: u64, purpose: Purpose) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ replica) ^ purpose as u64)
}

pub fn stream(seed: u64, replica: u64, purpose: Purpose) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, replica, purpose))
}

pub fn from_seed(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
