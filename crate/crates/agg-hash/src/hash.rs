//! Key hashing, slot mapping and the per-slot bloom byte.

use xxhash_rust::xxh3::xxh3_64_with_seed;

#[inline]
pub fn hash_key(key: &[u8], seed: u64) -> u64 {
    xxh3_64_with_seed(key, seed)
}

/// Maps the low half of `h` onto `0..n`.
#[inline]
pub fn slot_of(h: u64, n: usize) -> usize {
    (((h as u32) as u64 * n as u64) >> 32) as usize
}

/// Maps the high half of `h` onto `0..n`.
#[inline]
pub fn high_of(h: u64, n: usize) -> usize {
    (((h >> 32) * n as u64) >> 32) as usize
}

/// The two bloom bits a key sets (possibly the same bit).
#[inline]
pub fn bloom_bits(h: u64) -> u8 {
    let x = h.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (1u8 << ((x >> 58) & 7)) | (1u8 << ((x >> 61) & 7))
}

/// Probability that an absent key passes a slot's bloom byte after `j` keys
/// were recorded in it.
pub fn bloom_false_positive(j: usize) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let j2 = 2.0 * j as f64;
    let one_bit = 1.0 - (7.0f64 / 8.0).powf(j2);
    let two_bits = 1.0 - 2.0 * (7.0f64 / 8.0).powf(j2) + (6.0f64 / 8.0).powf(j2);
    one_bit / 8.0 + two_bits * 7.0 / 8.0
}
