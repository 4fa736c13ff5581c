//! Resource and power sampling during measurement runs.
//!
//! A [`Sampler`] polls a set of [`Probe`]s at a fixed interval on its own
//! thread and appends to a private log; consumers read the log after the
//! run stops. [`summarize`] reduces the samples over the steady window to
//! per-resource statistics and infers the binding resource: the busiest
//! resource when one crosses the utilization threshold, otherwise the
//! connector cap when the run used every slot, otherwise the storage
//! devices themselves.

mod log;
mod probes;
mod sampler;

pub use log::{read_sample_log, write_sample_log};
pub use probes::{OsProbe, Probe, ProbeReading, ReplayProbe, SimProbe};
pub use sampler::{start_sampling, SampleLog, Sampler};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::Resource;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("sampling interval must be positive")]
    InvalidInterval,
    #[error("empty steady segment")]
    EmptySegment,
    #[error("steady segment {start}..{end} outside the {len} recorded samples")]
    SegmentOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("sample log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("sample log format: {0}")]
    Format(String),
}

/// One monitoring observation. CPU and memory are utilization ratios;
/// device and network figures are byte rates; power is present only when a
/// meter probe is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSample {
    /// Seconds since the run started.
    pub timestamp: f64,
    pub cpu: f64,
    pub memory: f64,
    /// Bytes/second per device.
    pub device_io: Vec<f64>,
    /// Bytes/second received (client-facing traffic).
    pub net_rx: f64,
    /// Bytes/second transmitted (storage-facing traffic in disaggregated
    /// setups).
    pub net_tx: f64,
    /// Watts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceStat {
    pub mean: f64,
    pub max: f64,
}

fn stat_of(values: impl Iterator<Item = f64>) -> ResourceStat {
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        count += 1;
        sum += v;
        max = max.max(v);
    }
    if count == 0 {
        ResourceStat { mean: 0.0, max: 0.0 }
    } else {
        ResourceStat {
            mean: sum / count as f64,
            max,
        }
    }
}

/// Capacities and run shape needed to turn raw rates into utilizations and
/// to apply the connector rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeContext {
    /// Normalizes `net_rx` into front-end utilization.
    pub frontend_net_bw: Option<f64>,
    /// Normalizes `net_tx` into back-end utilization.
    pub backend_net_bw: Option<f64>,
    /// Bytes/second one device can move at full tilt; normalizes
    /// `device_io`.
    pub device_io_capacity: Option<f64>,
    pub device_count: usize,
    pub connector_cap: Option<usize>,
    /// A resource at or above this mean utilization is the bottleneck.
    pub bottleneck_threshold: f64,
}

impl SummarizeContext {
    pub fn bare(device_count: usize, connector_cap: Option<usize>) -> Self {
        SummarizeContext {
            frontend_net_bw: None,
            backend_net_bw: None,
            device_io_capacity: None,
            device_count,
            connector_cap,
            bottleneck_threshold: 0.9,
        }
    }
}

/// Per-resource statistics over the steady window plus the inferred
/// bottleneck. Net and device entries are present only when the context
/// provided capacities to normalize them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub cpu: ResourceStat,
    pub memory: ResourceStat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontend_net: Option<ResourceStat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_net: Option<ResourceStat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<ResourceStat>,
    /// Watts over the steady window, when a power probe was present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<ResourceStat>,
    pub power_probe_present: bool,
    pub inferred_bottleneck: Resource,
}

/// Picks the binding resource from steady-window utilization statistics.
pub fn bottleneck_of(
    candidates: &[(Resource, ResourceStat)],
    ctx: &SummarizeContext,
) -> Resource {
    let best = candidates
        .iter()
        .max_by(|a, b| {
            (a.1.mean, a.1.max)
                .partial_cmp(&(b.1.mean, b.1.max))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .filter(|(_, stat)| stat.mean >= ctx.bottleneck_threshold);
    match best {
        Some((resource, _)) => *resource,
        None => {
            if ctx.connector_cap == Some(ctx.device_count) {
                Resource::Connectors
            } else {
                Resource::Device
            }
        }
    }
}

/// Reduces `samples[segment]` to a [`ResourceReport`]. A pure function of
/// its inputs: re-running it on a saved log reproduces the report exactly.
pub fn summarize(
    samples: &[UtilizationSample],
    segment: std::ops::Range<usize>,
    ctx: &SummarizeContext,
) -> Result<ResourceReport, MonitorError> {
    if segment.is_empty() {
        return Err(MonitorError::EmptySegment);
    }
    if segment.end > samples.len() {
        return Err(MonitorError::SegmentOutOfRange {
            start: segment.start,
            end: segment.end,
            len: samples.len(),
        });
    }
    let window = &samples[segment];

    let cpu = stat_of(window.iter().map(|s| s.cpu));
    let memory = stat_of(window.iter().map(|s| s.memory));
    let frontend_net = ctx
        .frontend_net_bw
        .filter(|bw| *bw > 0.0)
        .map(|bw| stat_of(window.iter().map(|s| s.net_rx / bw)));
    let backend_net = ctx
        .backend_net_bw
        .filter(|bw| *bw > 0.0)
        .map(|bw| stat_of(window.iter().map(|s| s.net_tx / bw)));
    let device = ctx.device_io_capacity.filter(|c| *c > 0.0).map(|cap| {
        stat_of(window.iter().flat_map(|s| {
            s.device_io.iter().map(move |io| io / cap)
        }))
    });
    let power_probe_present = window.iter().any(|s| s.power.is_some());
    let power = power_probe_present
        .then(|| stat_of(window.iter().filter_map(|s| s.power)));

    let mut candidates = vec![(Resource::Cpu, cpu), (Resource::Memory, memory)];
    if let Some(f) = frontend_net {
        candidates.push((Resource::FrontendNet, f));
    }
    if let Some(b) = backend_net {
        candidates.push((Resource::BackendNet, b));
    }
    let inferred_bottleneck = bottleneck_of(&candidates, ctx);

    Ok(ResourceReport {
        cpu,
        memory,
        frontend_net,
        backend_net,
        device,
        power,
        power_probe_present,
        inferred_bottleneck,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, cpu: f64, memory: f64) -> UtilizationSample {
        UtilizationSample {
            timestamp: t,
            cpu,
            memory,
            device_io: vec![1000.0],
            net_rx: 0.0,
            net_tx: 0.0,
            power: None,
        }
    }

    #[test]
    fn constant_samples_have_mean_equal_max() {
        let samples: Vec<_> = (0..5).map(|i| sample(i as f64, 0.4, 0.2)).collect();
        let report = summarize(&samples, 0..5, &SummarizeContext::bare(1, Some(8))).unwrap();
        assert_eq!(report.cpu.mean, 0.4);
        assert_eq!(report.cpu.max, 0.4);
        assert_eq!(report.memory.mean, 0.2);
        assert!(!report.power_probe_present);
    }

    #[test]
    fn busiest_resource_wins_above_threshold() {
        let samples: Vec<_> = (0..5).map(|i| sample(i as f64, 0.99, 0.5)).collect();
        let report = summarize(&samples, 0..5, &SummarizeContext::bare(2, Some(8))).unwrap();
        assert_eq!(report.inferred_bottleneck, Resource::Cpu);
    }

    #[test]
    fn connector_rule_applies_when_slots_are_full_and_nothing_is_hot() {
        let samples: Vec<_> = (0..5).map(|i| sample(i as f64, 0.5, 0.3)).collect();
        let at_cap = summarize(&samples, 0..5, &SummarizeContext::bare(8, Some(8))).unwrap();
        assert_eq!(at_cap.inferred_bottleneck, Resource::Connectors);
        let below_cap = summarize(&samples, 0..5, &SummarizeContext::bare(3, Some(8))).unwrap();
        assert_eq!(below_cap.inferred_bottleneck, Resource::Device);
    }

    #[test]
    fn empty_segment_is_an_error() {
        let samples: Vec<_> = (0..5).map(|i| sample(i as f64, 0.5, 0.3)).collect();
        assert!(matches!(
            summarize(&samples, 2..2, &SummarizeContext::bare(1, None)),
            Err(MonitorError::EmptySegment)
        ));
        assert!(matches!(
            summarize(&samples, 2..9, &SummarizeContext::bare(1, None)),
            Err(MonitorError::SegmentOutOfRange { .. })
        ));
    }

    #[test]
    fn net_utilization_requires_capacities() {
        let mut samples: Vec<_> = (0..5).map(|i| sample(i as f64, 0.2, 0.3)).collect();
        for s in &mut samples {
            s.net_rx = 500.0;
            s.net_tx = 250.0;
        }
        let bare = summarize(&samples, 0..5, &SummarizeContext::bare(1, None)).unwrap();
        assert!(bare.frontend_net.is_none());
        let mut ctx = SummarizeContext::bare(1, None);
        ctx.frontend_net_bw = Some(1000.0);
        ctx.backend_net_bw = Some(1000.0);
        let with_caps = summarize(&samples, 0..5, &ctx).unwrap();
        assert_eq!(with_caps.frontend_net.unwrap().mean, 0.5);
        assert_eq!(with_caps.backend_net.unwrap().mean, 0.25);
    }
}
