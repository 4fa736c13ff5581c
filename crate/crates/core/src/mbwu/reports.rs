//! Units, platform results, and the efficiency arithmetic.

use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::simulator::{PlatformSpec, Resource};
use crate::workload::RunReport;

/// The measured reference point: peak steady WOPS of the workload on one
/// device with external caching defeated. Valid only for the workload and
/// media it was measured with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbwuUnit {
    pub wops: f64,
    pub workload_digest: String,
    pub media_id: String,
    pub thread_count_at_peak: u32,
    /// The run the peak was taken from.
    pub evidence: RunReport,
}

/// Outcome of a platform measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformResult {
    /// Platform MBWUs: peak steady WOPS divided by the unit.
    #[serde(rename = "M")]
    pub mbwus: f64,
    pub peak_wops: f64,
    pub device_count_at_peak: u32,
    /// Best MBWUs achievable with up to n devices, per n.
    pub curve: Vec<(u32, f64)>,
    pub bottleneck: Resource,
    /// Watts over the steady window at the peak, when a power source was
    /// sampled.
    pub power_at_peak: Option<f64>,
}

/// A platform's normalized efficiency. The workload digest and unit value
/// ride along so reports from different normalizations cannot be compared
/// by accident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    #[serde(rename = "M")]
    pub mbwus: f64,
    /// Currency per MBWU.
    pub cost_per_mbwu: f64,
    /// Kilowatts per MBWU, from the platform's amps x volts rating.
    pub power_per_mbwu: f64,
    /// Cubic meters per MBWU.
    pub space_per_mbwu: f64,
    pub workload_digest: String,
    pub unit_wops: f64,
}

/// Percent reductions of a candidate platform against a baseline.
/// Negative numbers mean the candidate is worse; values are not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub cost_percent_reduction: f64,
    pub power_percent_reduction: f64,
    pub space_percent_reduction: f64,
}

/// Cost, power, and space divided by the platform's MBWUs.
pub fn efficiency(
    platform: &PlatformSpec,
    unit: &MbwuUnit,
    result: &PlatformResult,
) -> Result<EfficiencyReport, MeasureError> {
    if !(result.mbwus > 0.0) {
        return Err(MeasureError::UndefinedEfficiency(format!(
            "platform MBWUs must be positive, got {}",
            result.mbwus
        )));
    }
    Ok(EfficiencyReport {
        mbwus: result.mbwus,
        cost_per_mbwu: platform.cost / result.mbwus,
        power_per_mbwu: platform.amps * platform.volts / (1000.0 * result.mbwus),
        space_per_mbwu: platform.volume / result.mbwus,
        workload_digest: unit.workload_digest.clone(),
        unit_wops: unit.wops,
    })
}

fn reduction(baseline: f64, candidate: f64, metric: &str) -> Result<f64, MeasureError> {
    if !(baseline > 0.0) {
        return Err(MeasureError::Incomparable(format!(
            "baseline {metric} is not positive"
        )));
    }
    Ok(100.0 * (1.0 - candidate / baseline))
}

/// Percent reduction per efficiency metric. Refuses to compare reports
/// normalized by different units: that comparison would be meaningless.
pub fn compare(
    baseline: &EfficiencyReport,
    candidate: &EfficiencyReport,
) -> Result<SavingsReport, MeasureError> {
    if baseline.workload_digest != candidate.workload_digest {
        return Err(MeasureError::Incomparable(format!(
            "workload digests differ: {} vs {}",
            baseline.workload_digest, candidate.workload_digest
        )));
    }
    if baseline.unit_wops != candidate.unit_wops {
        return Err(MeasureError::Incomparable(format!(
            "MBWU units differ: {} vs {}",
            baseline.unit_wops, candidate.unit_wops
        )));
    }
    Ok(SavingsReport {
        cost_percent_reduction: reduction(
            baseline.cost_per_mbwu,
            candidate.cost_per_mbwu,
            "cost_per_mbwu",
        )?,
        power_percent_reduction: reduction(
            baseline.power_per_mbwu,
            candidate.power_per_mbwu,
            "power_per_mbwu",
        )?,
        space_percent_reduction: reduction(
            baseline.space_per_mbwu,
            candidate.space_per_mbwu,
            "space_per_mbwu",
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::LatencyPercentiles;

    fn dummy_report() -> RunReport {
        RunReport {
            total_ops: 0,
            elapsed: 0.0,
            wops: 0.0,
            latency_percentiles: LatencyPercentiles {
                p50: 0,
                p95: 0,
                p99: 0,
            },
            per_thread_ops: vec![],
            throughput_series: vec![],
        }
    }

    fn unit(wops: f64) -> MbwuUnit {
        MbwuUnit {
            wops,
            workload_digest: "wd".into(),
            media_id: "media".into(),
            thread_count_at_peak: 8,
            evidence: dummy_report(),
        }
    }

    fn platform(cost: f64, amps: f64, volts: f64, volume: f64) -> PlatformSpec {
        PlatformSpec {
            cpu_capacity: 1e9,
            mem_capacity: 1e9,
            connectors: 8,
            frontend_net_bw: 1e9,
            backend_net_bw: 1e9,
            cost,
            volume,
            power_idle: 0.0,
            power_peak: amps * volts,
            amps,
            volts,
        }
    }

    fn result(m: f64) -> PlatformResult {
        PlatformResult {
            mbwus: m,
            peak_wops: m * 10_000.0,
            device_count_at_peak: 1,
            curve: vec![(1, m)],
            bottleneck: Resource::Device,
            power_at_peak: None,
        }
    }

    #[test]
    fn efficiency_quotients() {
        let report = efficiency(&platform(3000.0, 1.0, 120.0, 0.01), &unit(1e4), &result(6.0))
            .unwrap();
        assert_eq!(report.cost_per_mbwu, 500.0);
        // 120 W at 6 MBWUs: 0.02 kW per MBWU.
        assert_eq!(report.power_per_mbwu, 120.0 / 6000.0);
        assert!((report.space_per_mbwu - 0.01 / 6.0).abs() < 1e-18);

        let half = efficiency(&platform(10.0, 1.0, 120.0, 0.01), &unit(1e4), &result(0.5))
            .unwrap();
        assert_eq!(half.space_per_mbwu, 0.02);
    }

    #[test]
    fn zero_mbwus_is_undefined() {
        let err =
            efficiency(&platform(1.0, 1.0, 1.0, 1.0), &unit(1e4), &result(0.0)).unwrap_err();
        assert!(matches!(err, MeasureError::UndefinedEfficiency(_)));
    }

    #[test]
    fn identical_reports_have_zero_savings() {
        let e = efficiency(&platform(3000.0, 1.0, 120.0, 0.01), &unit(1e4), &result(6.0))
            .unwrap();
        let savings = compare(&e, &e).unwrap();
        assert_eq!(savings.cost_percent_reduction, 0.0);
        assert_eq!(savings.power_percent_reduction, 0.0);
        assert_eq!(savings.space_percent_reduction, 0.0);
    }

    #[test]
    fn savings_arithmetic_and_sign_convention() {
        let baseline = efficiency(
            &platform(1000.0, 1.0, 100.0, 0.1),
            &unit(1e4),
            &result(1.0),
        )
        .unwrap();
        let candidate = efficiency(
            &platform(360.0, 2.0, 100.0, 0.2),
            &unit(1e4),
            &result(1.0),
        )
        .unwrap();
        let savings = compare(&baseline, &candidate).unwrap();
        assert!((savings.cost_percent_reduction - 64.0).abs() < 1e-12);
        // Candidate draws twice the power: negative reduction, not clamped.
        assert!((savings.power_percent_reduction + 100.0).abs() < 1e-12);
        assert!((savings.space_percent_reduction + 100.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_units_are_incomparable() {
        let a = efficiency(&platform(1000.0, 1.0, 100.0, 0.1), &unit(1e4), &result(1.0))
            .unwrap();
        let mut b = a.clone();
        b.unit_wops = 2e4;
        assert!(matches!(
            compare(&a, &b),
            Err(MeasureError::Incomparable(_))
        ));
        let mut c = a.clone();
        c.workload_digest = "other".into();
        assert!(matches!(
            compare(&a, &c),
            Err(MeasureError::Incomparable(_))
        ));
    }

    #[test]
    fn savings_are_invariant_under_unit_scaling() {
        // Scaling the MBWU unit by k scales both platforms' M by 1/k; the
        // ratios that feed the savings are unit-free.
        let build = |k: f64| {
            let b = efficiency(
                &platform(3000.0, 1.0, 120.0, 0.06),
                &unit(1e4 * k),
                &result(6.0 / k),
            )
            .unwrap();
            let c = efficiency(
                &platform(90.0, 0.05, 120.0, 0.001),
                &unit(1e4 * k),
                &result(0.5 / k),
            )
            .unwrap();
            compare(&b, &c).unwrap()
        };
        let reference = build(1.0);
        for k in [0.5, 2.0, 10.0] {
            let scaled = build(k);
            assert!(
                (scaled.cost_percent_reduction - reference.cost_percent_reduction).abs() <= 1e-12
            );
            assert!(
                (scaled.power_percent_reduction - reference.power_percent_reduction).abs()
                    <= 1e-12
            );
            assert!(
                (scaled.space_percent_reduction - reference.space_percent_reduction).abs()
                    <= 1e-12
            );
        }
    }

    #[test]
    fn json_field_names_match_the_interface() {
        let e = efficiency(&platform(3000.0, 1.0, 120.0, 0.01), &unit(1e4), &result(6.0))
            .unwrap();
        let json = serde_json::to_value(&e).unwrap();
        for key in [
            "M",
            "cost_per_mbwu",
            "power_per_mbwu",
            "space_per_mbwu",
            "workload_digest",
            "unit_wops",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let u = unit(1e4);
        let json = serde_json::to_value(&u).unwrap();
        for key in [
            "wops",
            "workload_digest",
            "media_id",
            "thread_count_at_peak",
            "evidence",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
