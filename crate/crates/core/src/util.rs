//! Small numeric helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Binomial coefficient as f64, with the combinatorial convention that
/// out-of-range arguments give 0. Exact for values below 2^53.
pub(crate) fn binom(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Falling factorial `x·(x−1)·…·(x−r+1)`; 1 when `r = 0`.
pub(crate) fn falling(x: f64, r: u32) -> f64 {
    (0..r).map(|j| x - j as f64).product()
}

/// Sums a slice pairwise, which keeps the result independent of how the
/// terms were produced and tightens rounding on long accumulations.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives an independent RNG stream from a master seed and a list of
/// tags (stream labels, replicate indices, …). The same inputs always
/// produce the same stream, so replicates can run in any order or in
/// parallel without sharing state.
pub(crate) fn derive_rng(master: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut s = splitmix64(master ^ 0xa076_1d64_78bd_642f);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    ChaCha12Rng::seed_from_u64(s)
}

/// FNV-1a hash of a string, used to fold strategy labels into seed tags.
pub(crate) fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_edge_cases() {
        assert_eq!(binom(5, 0), 1.0);
        assert_eq!(binom(5, 5), 1.0);
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(5, 6), 0.0);
        assert_eq!(binom(5, -1), 0.0);
        assert_eq!(binom(-1, 0), 0.0);
        assert_eq!(binom(52, 26), 495918532948104.0);
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling(6.0, 0), 1.0);
        assert_eq!(falling(6.0, 3), 120.0);
        assert_eq!(falling(2.0, 4), 0.0);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn derived_streams_differ_by_tag() {
        use rand::RngCore;
        let mut a = derive_rng(1, &[0, 0]);
        let mut b = derive_rng(1, &[0, 1]);
        let mut a2 = derive_rng(1, &[0, 0]);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut a = derive_rng(1, &[0, 0]);
        assert_eq!(a.next_u64(), a2.next_u64());
    }
}
