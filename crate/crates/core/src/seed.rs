//! Seed derivation for per-item random streams.

/// One round of SplitMix64.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent-looking seed for item `index` of a stream seeded with `base`.
pub fn derive(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index)
}
