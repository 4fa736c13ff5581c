//! The workload parameter file and its validation rules.

use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::digest::sha256_json;

/// Zipf skew used when a workload file says `"zipf": {}` without a theta.
pub const DEFAULT_ZIPF_THETA: f64 = 0.99;

fn default_theta() -> f64 {
    DEFAULT_ZIPF_THETA
}

/// How record popularity is distributed across the key space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyDistribution {
    /// Rank r is drawn with probability proportional to 1/r^theta. A seeded
    /// permutation maps ranks to record indices so that popularity is
    /// decoupled from insertion order.
    Zipf {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Uniform,
}

impl Default for KeyDistribution {
    fn default() -> Self {
        KeyDistribution::Zipf {
            theta: DEFAULT_ZIPF_THETA,
        }
    }
}

/// Full definition of a workload. Serialized as the workload parameter file.
///
/// Either `record_count` or `dataset_size` must be given; when only
/// `dataset_size` is present the record count is derived as
/// `dataset_size / (key_size + value_size)`. Runs are bounded by `op_count`
/// (for finite streams) or `duration` seconds (for timed runs); at least one
/// must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    /// Key size in bytes.
    pub key_size: u64,
    /// Value size in bytes.
    pub value_size: u64,
    /// Fraction of operations that are GETs, in [0, 1].
    pub read_fraction: f64,
    /// Fraction of operations that are DELETEs, in [0, 1 - read_fraction].
    /// Defaults to 0: the remaining fraction is PUT (update) traffic.
    #[serde(default)]
    pub delete_fraction: f64,
    #[serde(default)]
    pub key_distribution: KeyDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_count: Option<u64>,
    /// Total dataset size in bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_size: Option<u64>,
    /// Stream length for finite op streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_count: Option<u64>,
    /// Run length in seconds for timed runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Load-phase insert rate cap in ops/second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_rate_limit: Option<u64>,
    pub seed: u64,
}

impl WorkloadSpec {
    /// Record size in bytes (key + value).
    pub fn record_size(&self) -> u64 {
        self.key_size + self.value_size
    }

    /// The effective number of records, derived from `dataset_size` when not
    /// given explicitly. When both are present they must agree to within one
    /// record.
    pub fn resolved_record_count(&self) -> Result<u64, WorkloadError> {
        let rs = self.record_size();
        if rs == 0 {
            return Err(WorkloadError::InvalidSpec(
                "key_size + value_size must be positive".into(),
            ));
        }
        match (self.record_count, self.dataset_size) {
            (Some(rc), None) => Ok(rc),
            (None, Some(ds)) => Ok(ds / rs),
            (Some(rc), Some(ds)) => {
                let implied = rc.saturating_mul(rs);
                if implied.abs_diff(ds) >= rs {
                    Err(WorkloadError::InvalidSpec(format!(
                        "record_count {rc} x record size {rs} disagrees with dataset_size {ds} by a full record"
                    )))
                } else {
                    Ok(rc)
                }
            }
            (None, None) => Err(WorkloadError::InvalidSpec(
                "one of record_count or dataset_size is required".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.key_size < 1 {
            return Err(WorkloadError::InvalidSpec("key_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return Err(WorkloadError::InvalidSpec(
                "read_fraction must be in [0, 1]".into(),
            ));
        }
        if self.delete_fraction < 0.0 || self.read_fraction + self.delete_fraction > 1.0 {
            return Err(WorkloadError::InvalidSpec(
                "delete_fraction must be in [0, 1 - read_fraction]".into(),
            ));
        }
        if let KeyDistribution::Zipf { theta } = self.key_distribution {
            if !theta.is_finite() || theta <= 0.0 {
                return Err(WorkloadError::InvalidSpec(
                    "zipf theta must be positive and finite".into(),
                ));
            }
        }
        let rc = self.resolved_record_count()?;
        if rc == 0 {
            return Err(WorkloadError::InvalidSpec(
                "record_count must be >= 1".into(),
            ));
        }
        // Keys are zero-padded decimal record indices; the key must be wide
        // enough to hold every index.
        if self.key_size < 20 && rc > 10u64.pow(self.key_size as u32) {
            return Err(WorkloadError::InvalidSpec(format!(
                "key_size {} cannot encode {} distinct records",
                self.key_size, rc
            )));
        }
        if self.op_count.is_none() && self.duration.is_none() {
            return Err(WorkloadError::InvalidSpec(
                "one of op_count or duration is required".into(),
            ));
        }
        if let Some(d) = self.duration {
            if !d.is_finite() || d < 0.0 {
                return Err(WorkloadError::InvalidSpec(
                    "duration must be non-negative".into(),
                ));
            }
        }
        if self.load_rate_limit == Some(0) {
            return Err(WorkloadError::InvalidSpec(
                "load_rate_limit must be positive when set".into(),
            ));
        }
        Ok(())
    }

    /// Digest identifying the workload's shape: the fields that change which
    /// operation stream it produces. Run-length knobs (`op_count`,
    /// `duration`, `load_rate_limit`) are excluded so a measured unit stays
    /// reusable across runs of different length.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Shape<'a> {
            key_size: u64,
            value_size: u64,
            read_fraction: f64,
            delete_fraction: f64,
            key_distribution: &'a KeyDistribution,
            record_count: u64,
            seed: u64,
        }
        let record_count = self.resolved_record_count().unwrap_or(0);
        sha256_json(&Shape {
            key_size: self.key_size,
            value_size: self.value_size,
            read_fraction: self.read_fraction,
            delete_fraction: self.delete_fraction,
            key_distribution: &self.key_distribution,
            record_count,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> WorkloadSpec {
        WorkloadSpec {
            key_size: 16,
            value_size: 4096,
            read_fraction: 0.5,
            delete_fraction: 0.0,
            key_distribution: KeyDistribution::default(),
            record_count: None,
            dataset_size: Some(40 * 1024 * 1024 * 1024),
            op_count: Some(1000),
            duration: None,
            load_rate_limit: None,
            seed: 42,
        }
    }

    #[test]
    fn record_count_derived_from_dataset_size() {
        // 40 GiB / (16 + 4096) bytes per record, floored.
        let spec = base();
        assert_eq!(spec.resolved_record_count().unwrap(), 10_444_959);
        spec.validate().unwrap();
    }

    #[test]
    fn record_count_and_dataset_size_must_agree() {
        let mut spec = base();
        spec.record_count = Some(10_444_959);
        spec.validate().unwrap();
        spec.record_count = Some(10_444_961);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rejects_bad_fractions_and_empty_keyspace() {
        let mut spec = base();
        spec.read_fraction = 1.5;
        assert!(spec.validate().is_err());

        let mut spec = base();
        spec.dataset_size = None;
        spec.record_count = Some(0);
        assert!(spec.validate().is_err());

        let mut spec = base();
        spec.key_size = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn key_width_must_cover_record_indices() {
        let mut spec = base();
        spec.key_size = 2;
        spec.dataset_size = None;
        spec.record_count = Some(101);
        assert!(spec.validate().is_err());
        spec.record_count = Some(100);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn digest_ignores_run_length_knobs() {
        let a = base();
        let mut b = base();
        b.op_count = Some(5);
        b.duration = Some(60.0);
        b.load_rate_limit = Some(100);
        assert_eq!(a.digest(), b.digest());

        let mut c = base();
        c.seed = 43;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn parameter_file_round_trips() {
        let json = r#"{
            "key_size": 16,
            "value_size": 4096,
            "read_fraction": 0.5,
            "key_distribution": {"zipf": {"theta": 0.99}},
            "dataset_size": 42949672960,
            "op_count": 1000000,
            "seed": 42
        }"#;
        let spec: WorkloadSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.resolved_record_count().unwrap(), 10_444_959);
        let back = serde_json::to_string(&spec).unwrap();
        let again: WorkloadSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(spec, again);
    }
}
