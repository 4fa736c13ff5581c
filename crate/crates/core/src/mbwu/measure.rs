//! Thread and device sweeps.

use serde::{Deserialize, Serialize};

use super::reports::{MbwuUnit, PlatformResult};
use super::steady::{detect_steady_state, SteadyParams, SteadySegment};
use super::MeasureError;
use crate::monitor::{summarize, SummarizeContext, UtilizationSample};
use crate::simulator::Resource;
use crate::workload::{RunReport, WorkloadSpec};

/// One sweep-point run plus the monitoring that accompanied it.
#[derive(Debug, Clone)]
pub struct MeasuredRun {
    pub report: RunReport,
    pub samples: Vec<UtilizationSample>,
    pub monitor_ctx: SummarizeContext,
}

/// A backend able to run the workload at a given concurrency and replica
/// count: the analytic simulator or live daemons.
pub trait Executor {
    /// Identifies the storage media so units are not reused across media.
    fn media_id(&self) -> String;
    /// Device interface queue depth; default thread-sweep bound.
    fn queue_depth(&self) -> u32;
    /// Devices available for replication.
    fn max_devices(&self) -> u32;
    fn run(
        &mut self,
        spec: &WorkloadSpec,
        threads: u32,
        n_devices: u32,
        duration: f64,
        sample_interval: f64,
    ) -> Result<MeasuredRun, MeasureError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    /// Seconds per sweep point.
    pub run_duration: f64,
    /// Throughput and monitor sampling interval in seconds.
    pub sample_interval: f64,
    pub steady: SteadyParams,
    /// Relative throughput gain below which a thread-sweep point counts as
    /// flat; two consecutive flat points stop the sweep.
    pub min_improvement: f64,
    /// MBWU gain below which a device-sweep point counts as flat; two
    /// consecutive flat points stop the sweep.
    pub mbwu_epsilon: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            run_duration: 10.0,
            sample_interval: 1.0,
            steady: SteadyParams::default(),
            min_improvement: 0.02,
            mbwu_epsilon: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreadSweepPoint {
    pub threads: u32,
    pub steady_wops: f64,
}

/// Unit measurement outcome: the unit plus the full sweep for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMeasurement {
    pub unit: MbwuUnit,
    pub sweep: Vec<ThreadSweepPoint>,
    /// Sweep points that produced no steady window, with diagnostics.
    pub skipped: Vec<(u32, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSweepPoint {
    pub n_devices: u32,
    pub steady_wops: f64,
    pub mbwus: f64,
    pub power_mean: Option<f64>,
    pub bottleneck: Resource,
}

/// Platform measurement outcome: the result plus per-point detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformMeasurement {
    pub result: PlatformResult,
    pub sweep: Vec<DeviceSweepPoint>,
    /// Device counts whose runs failed, with the error; the curve up to
    /// that point is still returned.
    pub failures: Vec<(u32, String)>,
}

/// Doubling schedule 1, 2, 4, ... capped at `max`, with `max` appended when
/// it is not a power of two.
fn doubling_schedule(max: u32) -> Vec<u32> {
    let mut schedule = Vec::new();
    let mut t = 1u32;
    while t <= max {
        schedule.push(t);
        if t > max / 2 {
            break;
        }
        t *= 2;
    }
    if *schedule.last().unwrap() != max {
        schedule.push(max);
    }
    schedule
}

fn steady_of_run(
    run: &MeasuredRun,
    steady: &SteadyParams,
) -> Result<Option<SteadySegment>, MeasureError> {
    detect_steady_state(&run.report.rate_series(), steady)
}

/// Clamps a throughput-series segment to the monitor's sample range; the
/// two streams share a sampling interval but may differ by a tick.
fn sample_range(seg: &SteadySegment, samples: &[UtilizationSample]) -> std::ops::Range<usize> {
    let start = seg.start.min(samples.len().saturating_sub(1));
    let end = (seg.start + seg.len).min(samples.len());
    start..end
}

/// Measures the MBWU unit: sweeps thread counts on one device with a
/// doubling schedule, takes the steady WOPS of each point, and returns the
/// peak. Stops early after two consecutive points improve the peak by less
/// than the configured threshold. The executor is expected to run with
/// external caching defeated.
pub fn measure_unit(
    executor: &mut dyn Executor,
    spec: &WorkloadSpec,
    max_threads: Option<u32>,
    config: &MeasureConfig,
) -> Result<UnitMeasurement, MeasureError> {
    spec.validate()?;
    let max_threads = max_threads.unwrap_or_else(|| executor.queue_depth()).max(1);
    let mut sweep = Vec::new();
    let mut skipped = Vec::new();
    let mut best: Option<(u32, f64, RunReport)> = None;
    let mut flat_points = 0u32;

    for threads in doubling_schedule(max_threads) {
        let run = executor.run(
            spec,
            threads,
            1,
            config.run_duration,
            config.sample_interval,
        )?;
        let Some(seg) = steady_of_run(&run, &config.steady)? else {
            skipped.push((threads, "no steady window".to_string()));
            continue;
        };
        let wops = seg.mean;
        sweep.push(ThreadSweepPoint {
            threads,
            steady_wops: wops,
        });
        let improvement = match &best {
            Some((_, best_wops, _)) => (wops - best_wops) / best_wops,
            None => f64::INFINITY,
        };
        if best.as_ref().map_or(true, |(_, b, _)| wops > *b) {
            best = Some((threads, wops, run.report.clone()));
        }
        if improvement < config.min_improvement {
            flat_points += 1;
            if flat_points >= 2 {
                break;
            }
        } else {
            flat_points = 0;
        }
    }

    let Some((thread_count_at_peak, wops, evidence)) = best else {
        return Err(MeasureError::NoSteadyState(format!(
            "no sweep point produced a steady window (skipped: {skipped:?})"
        )));
    };
    Ok(UnitMeasurement {
        unit: MbwuUnit {
            wops,
            workload_digest: spec.digest(),
            media_id: executor.media_id(),
            thread_count_at_peak,
            evidence,
        },
        sweep,
        skipped,
    })
}

/// Measures platform MBWUs: replicates the workload over 1..=max_devices
/// workload/device pairs under normal caching, records the steady aggregate
/// WOPS per count, and normalizes the peak by the unit. Stops early after
/// two consecutive counts gain less than `mbwu_epsilon`. Per-count failures
/// end the sweep and are annotated; the curve up to the failure stands.
pub fn measure_platform(
    executor: &mut dyn Executor,
    spec: &WorkloadSpec,
    unit: &MbwuUnit,
    max_devices: Option<u32>,
    threads: Option<u32>,
    config: &MeasureConfig,
) -> Result<PlatformMeasurement, MeasureError> {
    spec.validate()?;
    let spec_digest = spec.digest();
    if unit.workload_digest != spec_digest {
        return Err(MeasureError::UnitMismatch {
            unit_digest: unit.workload_digest.clone(),
            spec_digest,
        });
    }
    if !(unit.wops > 0.0) {
        return Err(MeasureError::MeasurementFailed(
            "unit wops must be positive".into(),
        ));
    }
    let max_devices = max_devices
        .unwrap_or_else(|| executor.max_devices())
        .min(executor.max_devices())
        .max(1);
    let threads = threads.unwrap_or(unit.thread_count_at_peak).max(1);

    let mut sweep: Vec<DeviceSweepPoint> = Vec::new();
    let mut failures = Vec::new();
    let mut curve: Vec<(u32, f64)> = Vec::new();
    let mut best: Option<(u32, f64, Option<f64>, Resource)> = None;
    let mut flat_points = 0u32;

    for n in 1..=max_devices {
        let outcome = executor
            .run(spec, threads, n, config.run_duration, config.sample_interval)
            .and_then(|run| {
                let seg = steady_of_run(&run, &config.steady)?.ok_or_else(|| {
                    MeasureError::NoSteadyState(format!("no steady window at n={n}"))
                })?;
                Ok((run, seg))
            });
        let (run, seg) = match outcome {
            Ok(pair) => pair,
            Err(e) => {
                failures.push((n, e.to_string()));
                break;
            }
        };
        let wops = seg.mean;
        let mbwus = wops / unit.wops;
        let report = summarize(&run.samples, sample_range(&seg, &run.samples), &run.monitor_ctx)?;
        let power_mean = report.power.map(|p| p.mean);
        sweep.push(DeviceSweepPoint {
            n_devices: n,
            steady_wops: wops,
            mbwus,
            power_mean,
            bottleneck: report.inferred_bottleneck,
        });

        let gain = match &best {
            Some((_, best_wops, _, _)) => (wops - best_wops) / unit.wops,
            None => f64::INFINITY,
        };
        if best.as_ref().map_or(true, |(_, b, _, _)| wops > *b) {
            best = Some((n, wops, power_mean, report.inferred_bottleneck));
        }
        // Curve reports the best achieved with up to n devices.
        let best_mbwus = best.as_ref().map(|(_, w, _, _)| w / unit.wops).unwrap();
        curve.push((n, best_mbwus));

        if gain < config.mbwu_epsilon {
            flat_points += 1;
            if flat_points >= 2 {
                break;
            }
        } else {
            flat_points = 0;
        }
    }

    let Some((device_count_at_peak, peak_wops, power_at_peak, bottleneck)) = best else {
        return Err(MeasureError::MeasurementFailed(format!(
            "no device count produced a steady run (failures: {failures:?})"
        )));
    };
    Ok(PlatformMeasurement {
        result: PlatformResult {
            mbwus: peak_wops / unit.wops,
            peak_wops,
            device_count_at_peak,
            curve,
            bottleneck,
            power_at_peak,
        },
        sweep,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_schedule_covers_the_cap() {
        assert_eq!(doubling_schedule(1), vec![1]);
        assert_eq!(doubling_schedule(8), vec![1, 2, 4, 8]);
        assert_eq!(doubling_schedule(32), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(doubling_schedule(12), vec![1, 2, 4, 8, 12]);
        assert_eq!(doubling_schedule(33), vec![1, 2, 4, 8, 16, 32, 33]);
    }
}
