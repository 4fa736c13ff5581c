//! Seeded key generation.
//!
//! Keys name record indices in `[0, record_count)`. The popularity
//! distribution draws a *rank*; a seeded bijective permutation maps ranks to
//! record indices so that the hottest keys are scattered across the
//! insertion order instead of clustering at the front of the store.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform, Zipf};

use super::{KeyDistribution, WorkloadError, WorkloadSpec};

/// SplitMix64 step; used to derive round keys and per-worker seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A seeded bijection on `[0, n)` built from a 4-round Feistel network with
/// cycle walking. O(1) memory, so it scales to datasets with tens of
/// millions of records where a shuffled index table would not.
#[derive(Debug, Clone)]
pub struct IndexPermutation {
    n: u64,
    half_bits: u32,
    round_keys: [u64; 4],
}

impl IndexPermutation {
    pub fn new(n: u64, seed: u64) -> Self {
        assert!(n > 0, "permutation domain must be non-empty");
        // Smallest even bit width that covers n-1.
        let bits = 64 - (n - 1).max(1).leading_zeros();
        let bits = (bits.max(2) + 1) & !1;
        let mut k = seed;
        let round_keys = std::array::from_fn(|_| {
            k = splitmix64(k);
            k
        });
        IndexPermutation {
            n,
            half_bits: bits / 2,
            round_keys,
        }
    }

    fn feistel(&self, x: u64) -> u64 {
        let mask = (1u64 << self.half_bits) - 1;
        let mut left = (x >> self.half_bits) & mask;
        let mut right = x & mask;
        for key in self.round_keys {
            let f = splitmix64(right ^ key) & mask;
            let next_right = left ^ f;
            left = right;
            right = next_right;
        }
        (left << self.half_bits) | right
    }

    /// Maps `i` in `[0, n)` to a distinct value in `[0, n)`.
    pub fn apply(&self, i: u64) -> u64 {
        debug_assert!(i < self.n);
        // Walk through the covering power-of-two domain until we land back
        // inside [0, n). The walk is a bijection on [0, n).
        let mut out = self.feistel(i);
        while out >= self.n {
            out = self.feistel(out);
        }
        out
    }
}

enum RankSampler {
    Uniform(Uniform<u64>),
    Zipf(Zipf<f64>),
}

/// Draws record indices according to the workload's key distribution.
/// Deterministic: the same (spec, seed) produces the same index sequence.
pub struct KeyGenerator {
    record_count: u64,
    key_size: usize,
    sampler: RankSampler,
    perm: IndexPermutation,
    rng: ChaCha8Rng,
}

impl KeyGenerator {
    pub fn from_spec(spec: &WorkloadSpec, seed: u64) -> Result<Self, WorkloadError> {
        let record_count = spec.resolved_record_count()?;
        Self::new(
            record_count,
            spec.key_distribution,
            spec.key_size as usize,
            seed,
        )
    }

    pub fn new(
        record_count: u64,
        distribution: KeyDistribution,
        key_size: usize,
        seed: u64,
    ) -> Result<Self, WorkloadError> {
        if record_count == 0 {
            return Err(WorkloadError::InvalidSpec(
                "record_count must be >= 1".into(),
            ));
        }
        let sampler = match distribution {
            KeyDistribution::Uniform => RankSampler::Uniform(
                Uniform::new(0, record_count)
                    .map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?,
            ),
            KeyDistribution::Zipf { theta } => RankSampler::Zipf(
                Zipf::new(record_count as f64, theta)
                    .map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?,
            ),
        };
        Ok(KeyGenerator {
            record_count,
            key_size,
            sampler,
            // Distinct streams for the rank draw and the rank permutation.
            perm: IndexPermutation::new(record_count, splitmix64(seed ^ 0x7065726d)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn record_count(&self) -> u64 {
        self.record_count
    }

    /// Record index the popularity rank maps to (ranks are 1-based; rank 1
    /// is the hottest).
    pub fn rank_to_index(&self, rank: u64) -> u64 {
        debug_assert!(rank >= 1 && rank <= self.record_count);
        self.perm.apply(rank - 1)
    }

    /// Draws the next record index.
    pub fn next_index(&mut self) -> u64 {
        match &self.sampler {
            RankSampler::Uniform(u) => u.sample(&mut self.rng),
            RankSampler::Zipf(z) => {
                let rank = z.sample(&mut self.rng) as u64;
                let rank = rank.clamp(1, self.record_count);
                self.perm.apply(rank - 1)
            }
        }
    }

    /// Draws the next key.
    pub fn next_key(&mut self) -> Vec<u8> {
        let idx = self.next_index();
        encode_key(idx, self.key_size)
    }
}

/// Record index as a zero-padded decimal string of exactly `key_size` bytes.
pub fn encode_key(index: u64, key_size: usize) -> Vec<u8> {
    let digits = index.to_string();
    let mut key = vec![b'0'; key_size];
    let start = key_size.saturating_sub(digits.len());
    key[start..].copy_from_slice(&digits.as_bytes()[digits.len() - (key_size - start)..]);
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn permutation_is_a_bijection() {
        for n in [1u64, 2, 3, 17, 100, 1000, 4097] {
            let perm = IndexPermutation::new(n, 0xfeed);
            let mut seen = HashSet::new();
            for i in 0..n {
                let out = perm.apply(i);
                assert!(out < n);
                assert!(seen.insert(out), "collision at n={n} i={i}");
            }
        }
    }

    #[test]
    fn permutation_depends_on_seed() {
        let a = IndexPermutation::new(1000, 1);
        let b = IndexPermutation::new(1000, 2);
        let differs = (0..1000).any(|i| a.apply(i) != b.apply(i));
        assert!(differs);
    }

    #[test]
    fn uniform_single_record_always_zero() {
        let mut gen = KeyGenerator::new(1, KeyDistribution::Uniform, 8, 7).unwrap();
        for _ in 0..100 {
            assert_eq!(gen.next_index(), 0);
            assert_eq!(gen.next_key(), b"00000000".to_vec());
        }
    }

    #[test]
    fn same_seed_same_keys() {
        let dist = KeyDistribution::Zipf { theta: 0.99 };
        let mut a = KeyGenerator::new(1000, dist, 16, 99).unwrap();
        let mut b = KeyGenerator::new(1000, dist, 16, 99).unwrap();
        for _ in 0..1000 {
            assert_eq!(a.next_key(), b.next_key());
        }
    }

    #[test]
    fn zipf_matches_exact_pmf_on_top_ranks() {
        // Oracle: the exact pmf p(r) = (1/r^theta) / H where H is the
        // harmonic normalizer computed by direct summation.
        let n = 100u64;
        let theta = 0.99;
        let h: f64 = (1..=n).map(|r| 1.0 / (r as f64).powf(theta)).sum();

        let mut gen =
            KeyGenerator::new(n, KeyDistribution::Zipf { theta }, 16, 20260810).unwrap();
        let draws = 1_000_000u64;
        let mut counts = vec![0u64; n as usize];
        for _ in 0..draws {
            counts[gen.next_index() as usize] += 1;
        }
        for rank in 1..=10u64 {
            let index = gen.rank_to_index(rank);
            let expected = (1.0 / (rank as f64).powf(theta)) / h;
            let observed = counts[index as usize] as f64 / draws as f64;
            let rel = (observed - expected).abs() / expected;
            assert!(
                rel <= 0.05,
                "rank {rank}: observed {observed:.5} expected {expected:.5} rel {rel:.4}"
            );
        }
    }

    #[test]
    fn zero_records_is_an_error() {
        assert!(KeyGenerator::new(0, KeyDistribution::Uniform, 8, 0).is_err());
    }

    #[test]
    fn key_encoding_zero_pads() {
        assert_eq!(encode_key(0, 4), b"0000".to_vec());
        assert_eq!(encode_key(123, 6), b"000123".to_vec());
        assert_eq!(encode_key(123, 3), b"123".to_vec());
    }
}
