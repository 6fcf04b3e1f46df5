//! Deterministic seed derivation.
//!
//! A single 64-bit master seed fans out into independent sub-seeds, one per
//! pipeline stage (synthesis, fold shuffling, restart sampling, shot
//! sampling, ...). The scheme is fixed so that experiments are reproducible
//! bit-for-bit across runs and platforms:
//!
//! ```text
//! stage_seed(master, tag)      = splitmix64(master ^ fnv1a64(tag))
//! item_seed(master, tag, i)    = splitmix64(stage_seed ^ (i * 0x9e3779b97f4a7c15))
//! ```

/// FNV-1a hash of a byte string (64-bit offset basis / prime).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; bijective on u64.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sub-seed for a named pipeline stage.
pub fn stage_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a64(tag.as_bytes()))
}

/// Sub-seed for the `i`-th item within a stage (per row, per repetition, ...).
pub fn item_seed(master: u64, tag: &str, i: u64) -> u64 {
    splitmix64(stage_seed(master, tag) ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}
