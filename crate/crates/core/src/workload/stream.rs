//! Reproducible operation streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::keygen::{splitmix64, KeyGenerator};
use super::{WorkloadError, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Get,
    Put,
    Delete,
}

/// One workload operation. Key length always equals the spec's `key_size`;
/// PUT values always have length `value_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadOp {
    Get { key: Vec<u8> },
    Put { key: Vec<u8>, value: Vec<u8> },
    Delete { key: Vec<u8> },
}

impl WorkloadOp {
    pub fn kind(&self) -> OpKind {
        match self {
            WorkloadOp::Get { .. } => OpKind::Get,
            WorkloadOp::Put { .. } => OpKind::Put,
            WorkloadOp::Delete { .. } => OpKind::Delete,
        }
    }

    pub fn key(&self) -> &[u8] {
        match self {
            WorkloadOp::Get { key } | WorkloadOp::Put { key, .. } | WorkloadOp::Delete { key } => {
                key
            }
        }
    }
}

/// Iterator of operations for one worker. A pure function of
/// (spec, seed): two streams built from the same inputs are identical.
pub struct OpStream {
    keygen: KeyGenerator,
    rng: ChaCha8Rng,
    read_fraction: f64,
    delete_fraction: f64,
    value_size: usize,
    remaining: Option<u64>,
}

impl OpStream {
    /// Stream bounded by the spec's `op_count`.
    pub fn new(spec: &WorkloadSpec, seed: u64) -> Result<Self, WorkloadError> {
        spec.validate()?;
        let op_count = spec.op_count.ok_or_else(|| {
            WorkloadError::InvalidSpec("op_count is required for a bounded stream".into())
        })?;
        Self::with_limit(spec, seed, Some(op_count))
    }

    /// Unbounded stream; the caller stops it (used by timed runs).
    pub fn unbounded(spec: &WorkloadSpec, seed: u64) -> Result<Self, WorkloadError> {
        spec.validate()?;
        Self::with_limit(spec, seed, None)
    }

    fn with_limit(
        spec: &WorkloadSpec,
        seed: u64,
        remaining: Option<u64>,
    ) -> Result<Self, WorkloadError> {
        Ok(OpStream {
            keygen: KeyGenerator::from_spec(spec, seed)?,
            // Independent stream for the op-kind and value draws.
            rng: ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6f707374)),
            read_fraction: spec.read_fraction,
            delete_fraction: spec.delete_fraction,
            value_size: spec.value_size as usize,
            remaining,
        })
    }
}

impl Iterator for OpStream {
    type Item = WorkloadOp;

    fn next(&mut self) -> Option<WorkloadOp> {
        if let Some(rem) = &mut self.remaining {
            if *rem == 0 {
                return None;
            }
            *rem -= 1;
        }
        let key = self.keygen.next_key();
        let roll: f64 = self.rng.random();
        Some(if roll < self.read_fraction {
            WorkloadOp::Get { key }
        } else if roll < self.read_fraction + self.delete_fraction {
            WorkloadOp::Delete { key }
        } else {
            let mut value = vec![0u8; self.value_size];
            self.rng.fill(&mut value[..]);
            WorkloadOp::Put { key, value }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::KeyDistribution;

    fn spec(read_fraction: f64, op_count: u64) -> WorkloadSpec {
        WorkloadSpec {
            key_size: 16,
            value_size: 64,
            read_fraction,
            delete_fraction: 0.0,
            key_distribution: KeyDistribution::Zipf { theta: 0.99 },
            record_count: Some(1000),
            dataset_size: None,
            op_count: Some(op_count),
            duration: None,
            load_rate_limit: None,
            seed: 42,
        }
    }

    #[test]
    fn read_only_stream_is_all_gets() {
        let ops: Vec<_> = OpStream::new(&spec(1.0, 1000), 1).unwrap().collect();
        assert_eq!(ops.len(), 1000);
        assert!(ops.iter().all(|op| op.kind() == OpKind::Get));
    }

    #[test]
    fn mixed_stream_has_binomial_get_count() {
        // At a fixed seed, 10^6 draws at p=0.5 land within 1% of 500k.
        let gets = OpStream::new(&spec(0.5, 1_000_000), 7)
            .unwrap()
            .filter(|op| op.kind() == OpKind::Get)
            .count() as f64;
        assert!(
            (gets - 500_000.0).abs() <= 5_000.0,
            "gets = {gets}, expected 500000 +- 5000"
        );
    }

    #[test]
    fn put_values_have_value_size_bytes() {
        let s = spec(0.0, 100);
        for op in OpStream::new(&s, 3).unwrap() {
            match op {
                WorkloadOp::Put { key, value } => {
                    assert_eq!(key.len(), 16);
                    assert_eq!(value.len(), 64);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn delete_fraction_produces_deletes() {
        let mut s = spec(0.5, 10_000);
        s.delete_fraction = 0.25;
        let ops: Vec<_> = OpStream::new(&s, 11).unwrap().collect();
        let deletes = ops.iter().filter(|op| op.kind() == OpKind::Delete).count();
        assert!(deletes > 1500 && deletes < 3500, "deletes = {deletes}");
    }

    #[test]
    fn same_inputs_same_stream() {
        let s = spec(0.5, 5000);
        let a: Vec<_> = OpStream::new(&s, 9).unwrap().collect();
        let b: Vec<_> = OpStream::new(&s, 9).unwrap().collect();
        assert_eq!(a, b);
    }
}
