//! Seeded randomness.
//!
//! All randomness in the pipeline flows from [`SplitMix64`], a 64-bit
//! counter-based generator: the n-th output is `mix(seed + n * 0x9E3779B97F4A7C15)`.
//! The helpers below fix how raw 64-bit outputs become floats, bounded
//! integers and permutations, so a reimplementation that follows these rules
//! reproduces the same initialisations, root selections and splits.

use rand_core::{RngCore, SeedableRng};
pub use rand_xoshiro::SplitMix64;

/// Creates a generator from a 64-bit seed.
pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a string tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut rng = seeded(seed ^ fnv1a(tag.as_bytes()));
    rng.next_u64()
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Uniform float in `[0, 1)` from the top 53 bits.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform float in `[lo, hi)`.
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(rng)
}

/// Integer in `0..n` by multiply-shift (`(x * n) >> 64`). `n` must be non-zero.
pub fn below(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

/// Bernoulli draw with probability `p`.
pub fn chance(rng: &mut impl RngCore, p: f64) -> bool {
    unit_f64(rng) < p
}

/// Fisher–Yates shuffle, swapping `i` with `below(i + 1)` for `i` descending.
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// Picks one element uniformly.
pub fn pick<'a, T>(rng: &mut impl RngCore, items: &'a [T]) -> &'a T {
    &items[below(rng, items.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_stream() {
        // Reference outputs of SplitMix64 seeded with 0.
        let mut rng = seeded(0);
        assert_eq!(rng.next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(rng.next_u64(), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = seeded(7);
        for n in 1..50 {
            for _ in 0..20 {
                assert!(below(&mut rng, n) < n);
            }
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = seeded(3);
        let mut v: Vec<u32> = (0..100).collect();
        shuffle(&mut rng, &mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
