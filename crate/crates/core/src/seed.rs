//! Stable seed derivation. `std`'s hashers are not guaranteed stable across
//! releases, so seeds are derived with FNV-1a followed by a SplitMix64
//! finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a base seed with an ordered list of labels.
pub fn derive(base: u64, parts: &[&str]) -> u64 {
    let mut h = splitmix(base);
    for p in parts {
        h = splitmix(h ^ fnv1a(p.as_bytes()));
        // separator so ["ab", "c"] and ["a", "bc"] differ
        h = splitmix(h ^ 0x1f);
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
