//! Deterministic substream seeding.
//!
//! Every random decision in the crate flows from one master seed. Substream
//! seeds are derived by hashing a path of string parts (fold ids, class
//! names, purpose tags) into the master seed with a fixed FNV-1a /
//! splitmix64 combination, so results never depend on platform hashers,
//! thread schedules or iteration order.

/// splitmix64 finalizer; good avalanche behavior for seed mixing.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Derives the seed of a named substream. Parts are hashed with explicit
/// separators so `["ab", "c"]` and `["a", "bc"]` produce different seeds.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in part.as_bytes() {
            h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
        }
        h = (h ^ 0x1f).wrapping_mul(FNV_PRIME);
    }
    splitmix64(h ^ splitmix64(master))
}

/// Derives the seed of the `index`-th member of a named substream family.
pub fn derive_indexed_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, &[label]) ^ splitmix64(index.wrapping_add(0x9e37)))
}
