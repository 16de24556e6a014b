//! Feature hashing: unsigned murmur3 (x86 32-bit variant) over the UTF-8
//! bytes of an n-gram, reduced modulo the bin count.

/// murmur3 x86 32-bit.
pub fn murmur3_x86_32(bytes: &[u8], seed: u32) -> u32 {
    const C1: u32 = 0xcc9e_2d51;
    const C2: u32 = 0x1b87_3593;

    let mut h = seed;
    let blocks = bytes.len() / 4;

    for i in 0..blocks {
        let k = u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
        let k = k.wrapping_mul(C1).rotate_left(15).wrapping_mul(C2);
        h ^= k;
        h = h.rotate_left(13).wrapping_mul(5).wrapping_add(0xe654_6b64);
    }

    let tail = &bytes[blocks * 4..];
    let mut k: u32 = 0;
    if tail.len() >= 3 {
        k ^= u32::from(tail[2]) << 16;
    }
    if tail.len() >= 2 {
        k ^= u32::from(tail[1]) << 8;
    }
    if !tail.is_empty() {
        k ^= u32::from(tail[0]);
        k = k.wrapping_mul(C1).rotate_left(15).wrapping_mul(C2);
        h ^= k;
    }

    h ^= bytes.len() as u32;
    // fmix32
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^= h >> 16;
    h
}

/// Map an n-gram string to a bin in `[0, 2^hash_bits)`.
pub fn hash_feature(ngram: &str, seed: u32, hash_bits: u32) -> u32 {
    debug_assert!((1..=32).contains(&hash_bits));
    let h = murmur3_x86_32(ngram.as_bytes(), seed);
    if hash_bits == 32 {
        h
    } else {
        h & ((1u32 << hash_bits) - 1)
    }
}
