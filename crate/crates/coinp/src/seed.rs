//! Deterministic seed derivation.
//!
//! Every random stream in the crate is seeded through [`derive`] from a
//! master seed plus a list of tags (mixed with the splitmix64 finalizer),
//! so results are independent of thread scheduling: a replication gets the
//! same stream whether it runs first on one worker or last on sixteen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a sequence of tags.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut acc = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    for &t in tags {
        acc = mix(acc ^ mix(t ^ 0x6a09_e667_f3bc_c909));
    }
    acc
}

/// FNV-1a over the bytes of `s`, for labelling streams by name.
pub fn tag(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The crate-standard RNG for a derived seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
