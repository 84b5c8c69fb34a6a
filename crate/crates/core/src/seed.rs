//! Per-phase seed derivation.
//!
//! Every random phase draws from a ChaCha8 stream seeded with
//! `derive(master, label, index)`:
//!
//! ```text
//! h = splitmix64(master)
//! for byte in label: h = splitmix64(h ^ byte)
//! seed = splitmix64(h ^ splitmix64(index))
//! ```
//!
//! Phases can therefore be replayed on their own from the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, label: &str, index: u64) -> u64 {
    let mut h = splitmix64(master);
    for b in label.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ splitmix64(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
