//! Analytic platform model.
//!
//! A platform runs N replicated workload/device pairs under a scenario
//! (integrated, network, or disaggregated). Steady-state throughput is the
//! minimum over the active resource capacities:
//!
//! - device: `n * media_wops`
//! - cpu: `cpu_capacity / cycles_per_wo`, where cycles grow with memory
//!   pressure once the working set overshoots memory and network scenarios
//!   add per-operation packet-processing cycles
//! - front-end network (network and disaggregated): `frontend_net_bw /
//!   bytes_per_wo_frontend`
//! - back-end network (disaggregated only): `backend_net_bw /
//!   (bytes_per_wo_frontend * amplification)` — storage traffic carries the
//!   full amplified byte stream
//!
//! Attaching a device never lowers reported throughput: the model picks the
//! best device count up to the requested one, since an operator would not
//! activate replicas that reduce aggregate throughput. The functions are
//! pure and deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator spec: {0}")]
    InvalidSpec(String),
}

/// Identifies the resource that binds a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Cpu,
    Memory,
    FrontendNet,
    BackendNet,
    Device,
    Connectors,
}

impl std::fmt::Display for Resource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Resource::Cpu => "cpu",
            Resource::Memory => "memory",
            Resource::FrontendNet => "frontend_net",
            Resource::BackendNet => "backend_net",
            Resource::Device => "device",
            Resource::Connectors => "connectors",
        };
        f.write_str(name)
    }
}

/// One storage device as the workload sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    /// Device-bound peak WOPS for the workload — the MBWU unit by
    /// construction.
    pub media_wops: f64,
    /// Interface queue depth; bounds the thread sweep, not the throughput
    /// formula.
    pub queue_depth: u32,
    pub cost: f64,
    /// Watts drawn by one active device.
    pub power_active: f64,
    /// Device-side bytes moved per workload operation, amplification
    /// included.
    pub bytes_per_wo_device: f64,
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.media_wops > 0.0) {
            return Err(SimError::InvalidSpec("media_wops must be > 0".into()));
        }
        if self.queue_depth < 1 {
            return Err(SimError::InvalidSpec("queue_depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Platform capacities and ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    /// Cycles per second.
    pub cpu_capacity: f64,
    /// Bytes.
    pub mem_capacity: f64,
    /// Hardware connectors available for storage devices.
    pub connectors: u32,
    /// Bytes per second.
    pub frontend_net_bw: f64,
    /// Bytes per second.
    pub backend_net_bw: f64,
    pub cost: f64,
    /// Cubic meters.
    pub volume: f64,
    pub power_idle: f64,
    pub power_peak: f64,
    /// Current draw at peak, used by the kW-per-MBWU formula.
    pub amps: f64,
    /// Supply voltage.
    pub volts: f64,
}

impl PlatformSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.connectors < 1 {
            return Err(SimError::InvalidSpec("connectors must be >= 1".into()));
        }
        if self.power_idle > self.power_peak {
            return Err(SimError::InvalidSpec(
                "power_idle must not exceed power_peak".into(),
            ));
        }
        let rating = self.amps * self.volts;
        if self.power_peak > 0.0 && (rating - self.power_peak).abs() / self.power_peak > 0.01 {
            return Err(SimError::InvalidSpec(format!(
                "amps*volts = {rating} disagrees with power_peak = {} by more than 1%",
                self.power_peak
            )));
        }
        Ok(())
    }
}

fn default_beta() -> f64 {
    1.0
}

/// What one workload operation demands from the platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadDemand {
    pub cpu_cycles_per_wo: f64,
    /// Working set each replica adds, in bytes.
    pub mem_per_device: f64,
    /// Logical bytes crossing the front-end per operation.
    pub bytes_per_wo_frontend: f64,
    /// Back-end bytes per logical byte (>= 1).
    pub amplification: f64,
    /// Extra cycles per operation when traffic crosses a network.
    pub net_cpu_cycles_per_wo: f64,
    /// Slope of the memory-pressure penalty; calibration constant.
    #[serde(default = "default_beta")]
    pub mem_pressure_beta: f64,
}

impl WorkloadDemand {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("cpu_cycles_per_wo", self.cpu_cycles_per_wo),
            ("mem_per_device", self.mem_per_device),
            ("bytes_per_wo_frontend", self.bytes_per_wo_frontend),
            ("net_cpu_cycles_per_wo", self.net_cpu_cycles_per_wo),
            ("mem_pressure_beta", self.mem_pressure_beta),
        ] {
            if !(v >= 0.0) {
                return Err(SimError::InvalidSpec(format!("{name} must be >= 0")));
            }
        }
        if !(self.amplification >= 1.0) {
            return Err(SimError::InvalidSpec("amplification must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Integrated,
    Network,
    Disaggregated,
}

/// Placement of the workload relative to the storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Connector count override; a disaggregated setup typically consumes a
    /// slot for the NIC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connector_override: Option<u32>,
}

impl Scenario {
    pub fn integrated() -> Self {
        Scenario {
            kind: ScenarioKind::Integrated,
            connector_override: None,
        }
    }

    pub fn network() -> Self {
        Scenario {
            kind: ScenarioKind::Network,
            connector_override: None,
        }
    }

    pub fn disaggregated(connector_override: Option<u32>) -> Self {
        Scenario {
            kind: ScenarioKind::Disaggregated,
            connector_override,
        }
    }
}

/// Per-resource utilization in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub cpu: f64,
    pub memory: f64,
    pub frontend_net: f64,
    pub backend_net: f64,
    pub device: f64,
    pub connectors: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Steady-state workload operations per second.
    pub wops: f64,
    pub utilization: Utilization,
    /// Platform watts plus active device watts.
    pub power: f64,
    pub binding_resource: Resource,
    /// Device count the result was achieved with (<= requested).
    pub devices_active: u32,
}

/// Multiplier on per-operation CPU cycles once the aggregate working set
/// overshoots memory: 1 below capacity, then grows linearly with the
/// overshoot fraction. Monotone non-decreasing in the device count.
pub fn memory_pressure_factor(
    platform: &PlatformSpec,
    demand: &WorkloadDemand,
    n_devices: u32,
) -> f64 {
    let working_set = n_devices as f64 * demand.mem_per_device;
    if working_set <= platform.mem_capacity || demand.mem_per_device == 0.0 {
        1.0
    } else {
        1.0 + demand.mem_pressure_beta * (working_set - platform.mem_capacity)
            / platform.mem_capacity
    }
}

struct Terms {
    device: f64,
    cpu: f64,
    frontend: Option<f64>,
    backend: Option<f64>,
}

fn terms_at(
    platform: &PlatformSpec,
    device: &DeviceSpec,
    demand: &WorkloadDemand,
    scenario: &Scenario,
    n: u32,
) -> Result<Terms, SimError> {
    let crosses_network = scenario.kind != ScenarioKind::Integrated;
    let cycles_base = demand.cpu_cycles_per_wo
        + if crosses_network {
            demand.net_cpu_cycles_per_wo
        } else {
            0.0
        };
    let cycles = cycles_base * memory_pressure_factor(platform, demand, n);
    let cpu = if cycles > 0.0 {
        if !(platform.cpu_capacity > 0.0) {
            return Err(SimError::InvalidSpec(
                "cpu_capacity must be > 0 when operations cost cycles".into(),
            ));
        }
        platform.cpu_capacity / cycles
    } else {
        f64::INFINITY
    };
    let frontend = if crosses_network && demand.bytes_per_wo_frontend > 0.0 {
        if !(platform.frontend_net_bw > 0.0) {
            return Err(SimError::InvalidSpec(
                "frontend_net_bw must be > 0 for network scenarios".into(),
            ));
        }
        Some(platform.frontend_net_bw / demand.bytes_per_wo_frontend)
    } else {
        None
    };
    let backend = if scenario.kind == ScenarioKind::Disaggregated
        && demand.bytes_per_wo_frontend > 0.0
    {
        if !(platform.backend_net_bw > 0.0) {
            return Err(SimError::InvalidSpec(
                "backend_net_bw must be > 0 for disaggregated scenarios".into(),
            ));
        }
        Some(platform.backend_net_bw / (demand.bytes_per_wo_frontend * demand.amplification))
    } else {
        None
    };
    Ok(Terms {
        device: n as f64 * device.media_wops,
        cpu,
        frontend,
        backend,
    })
}

fn min_terms(t: &Terms) -> f64 {
    let mut m = t.device.min(t.cpu);
    if let Some(f) = t.frontend {
        m = m.min(f);
    }
    if let Some(b) = t.backend {
        m = m.min(b);
    }
    m
}

/// Throughput, utilization, and power for `n_devices` replicated
/// workload/device pairs under the scenario.
pub fn simulate(
    platform: &PlatformSpec,
    device: &DeviceSpec,
    demand: &WorkloadDemand,
    scenario: &Scenario,
    n_devices: u32,
) -> Result<SimResult, SimError> {
    platform.validate()?;
    device.validate()?;
    demand.validate()?;
    if n_devices < 1 {
        return Err(SimError::InvalidSpec("n_devices must be >= 1".into()));
    }
    if demand.mem_per_device > 0.0 && !(platform.mem_capacity > 0.0) {
        return Err(SimError::InvalidSpec(
            "mem_capacity must be > 0 when replicas consume memory".into(),
        ));
    }
    let connectors = scenario.connector_override.unwrap_or(platform.connectors);
    if connectors < 1 {
        return Err(SimError::InvalidSpec(
            "effective connectors must be >= 1".into(),
        ));
    }
    let n_cap = n_devices.min(connectors);

    // Best achievable device count up to the cap; memory pressure can make
    // an extra replica a net loss. Ties prefer the larger count, so in the
    // common regime (throughput non-decreasing in devices) every requested
    // device is active.
    let mut best_n = 1;
    let mut best_wops = f64::NEG_INFINITY;
    for n in 1..=n_cap {
        let wops = min_terms(&terms_at(platform, device, demand, scenario, n)?);
        if wops >= best_wops {
            best_wops = wops;
            best_n = n;
        }
    }
    let n = best_n;
    let terms = terms_at(platform, device, demand, scenario, n)?;
    let wops = min_terms(&terms);

    let utilization = Utilization {
        cpu: if terms.cpu.is_finite() {
            wops / terms.cpu
        } else {
            0.0
        },
        memory: if platform.mem_capacity > 0.0 {
            (n as f64 * demand.mem_per_device / platform.mem_capacity).min(1.0)
        } else {
            0.0
        },
        frontend_net: terms.frontend.map_or(0.0, |f| wops / f),
        backend_net: terms.backend.map_or(0.0, |b| wops / b),
        device: wops / terms.device,
        connectors: n as f64 / connectors as f64,
    };

    // Binding resource: the term the min() picked, device on ties. A
    // device-bound result at the connector cap is a real-estate limit.
    let mut binding = Resource::Device;
    if terms.device > wops {
        if terms.cpu == wops {
            binding = Resource::Cpu;
        }
        if terms.frontend == Some(wops) && binding == Resource::Device {
            binding = Resource::FrontendNet;
        }
        if terms.backend == Some(wops) && binding == Resource::Device {
            binding = Resource::BackendNet;
        }
    } else if n == connectors && n_devices >= connectors {
        binding = Resource::Connectors;
    }

    let platform_load = utilization
        .cpu
        .max(utilization.memory)
        .max(utilization.frontend_net)
        .max(utilization.backend_net)
        .clamp(0.0, 1.0);
    let power = platform.power_idle
        + (platform.power_peak - platform.power_idle) * platform_load
        + n as f64 * device.power_active;

    Ok(SimResult {
        wops,
        utilization,
        power,
        binding_resource: binding,
        devices_active: n,
    })
}

/// One point of the MBWU-versus-devices curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_devices: u32,
    pub wops: f64,
    /// `wops / media_wops`: platform throughput normalized by the device
    /// unit.
    pub mbwus: f64,
    pub power: f64,
    pub binding_resource: Resource,
}

/// MBWUs as a function of attached devices, for n = 1..=n_max. The sequence
/// is non-decreasing with non-increasing marginal gains and plateaus by the
/// connector cap.
pub fn mbwu_curve(
    platform: &PlatformSpec,
    device: &DeviceSpec,
    demand: &WorkloadDemand,
    scenario: &Scenario,
    n_max: u32,
) -> Result<Vec<CurvePoint>, SimError> {
    if n_max < 1 {
        return Err(SimError::InvalidSpec("n_max must be >= 1".into()));
    }
    (1..=n_max)
        .map(|n| {
            let sim = simulate(platform, device, demand, scenario, n)?;
            Ok(CurvePoint {
                n_devices: n,
                wops: sim.wops,
                mbwus: sim.wops / device.media_wops,
                power: sim.power,
                binding_resource: sim.binding_resource,
            })
        })
        .collect()
}

/// Writes a curve as `n_devices,wops,mbwus,watts,binding_resource` CSV.
pub fn write_curve_csv<W: std::io::Write>(curve: &[CurvePoint], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n_devices", "wops", "mbwus", "watts", "binding_resource"])?;
    for p in curve {
        w.write_record([
            p.n_devices.to_string(),
            p.wops.to_string(),
            p.mbwus.to_string(),
            p.power.to_string(),
            p.binding_resource.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ample_platform() -> PlatformSpec {
        PlatformSpec {
            cpu_capacity: 1e12,
            mem_capacity: 1e12,
            connectors: 16,
            frontend_net_bw: 1e12,
            backend_net_bw: 1e12,
            cost: 1000.0,
            volume: 0.05,
            power_idle: 50.0,
            power_peak: 200.0,
            amps: 1.667,
            volts: 120.0,
        }
    }

    pub(crate) fn basic_device() -> DeviceSpec {
        DeviceSpec {
            media_wops: 10_000.0,
            queue_depth: 32,
            cost: 150.0,
            power_active: 5.0,
            bytes_per_wo_device: 24_672.0,
        }
    }

    pub(crate) fn basic_demand() -> WorkloadDemand {
        WorkloadDemand {
            cpu_cycles_per_wo: 50_000.0,
            mem_per_device: 4e9,
            bytes_per_wo_frontend: 4112.0,
            amplification: 6.0,
            net_cpu_cycles_per_wo: 5_000.0,
            mem_pressure_beta: 1.0,
        }
    }

    #[test]
    fn pressure_factor_below_capacity_is_one() {
        let platform = ample_platform();
        let mut demand = basic_demand();
        demand.mem_per_device = platform.mem_capacity / 8.0;
        assert_eq!(memory_pressure_factor(&platform, &demand, 4), 1.0);
    }

    #[test]
    fn pressure_factor_at_full_overshoot_is_two() {
        let mut platform = ample_platform();
        platform.mem_capacity = 100.0;
        let mut demand = basic_demand();
        demand.mem_per_device = 100.0;
        demand.mem_pressure_beta = 1.0;
        // 2 devices want 200 bytes against 100: overshoot is 100% of
        // capacity.
        assert_eq!(memory_pressure_factor(&platform, &demand, 2), 2.0);
    }

    #[test]
    fn pressure_factor_is_monotone() {
        let mut platform = ample_platform();
        platform.mem_capacity = 64.0 * 1e9;
        let demand = basic_demand();
        let mut prev = 0.0;
        for n in 1..=64 {
            let f = memory_pressure_factor(&platform, &demand, n);
            assert!(f >= prev && f >= 1.0);
            prev = f;
        }
    }

    #[test]
    fn single_device_on_ample_platform_is_device_bound() {
        let result = simulate(
            &ample_platform(),
            &basic_device(),
            &basic_demand(),
            &Scenario::integrated(),
            1,
        )
        .unwrap();
        assert_eq!(result.wops, 10_000.0);
        assert_eq!(result.binding_resource, Resource::Device);
        assert_eq!(result.utilization.device, 1.0);
    }

    #[test]
    fn cpu_cap_produces_a_plateau_at_two_devices() {
        let device = basic_device();
        let demand = WorkloadDemand {
            cpu_cycles_per_wo: 50_000.0,
            mem_per_device: 0.0,
            bytes_per_wo_frontend: 0.0,
            amplification: 1.0,
            net_cpu_cycles_per_wo: 0.0,
            mem_pressure_beta: 1.0,
        };
        let mut platform = ample_platform();
        // cpu term = 2 * c(1) * media_wops / c(1) = 2 * media_wops.
        platform.cpu_capacity = 2.0 * demand.cpu_cycles_per_wo * device.media_wops;
        let w = |n| {
            simulate(&platform, &device, &demand, &Scenario::integrated(), n)
                .unwrap()
                .wops
        };
        assert_eq!(w(1), 10_000.0);
        assert_eq!(w(2), 20_000.0);
        assert_eq!(w(3), 20_000.0);
        let r3 = simulate(&platform, &device, &demand, &Scenario::integrated(), 3).unwrap();
        assert_eq!(r3.binding_resource, Resource::Cpu);
    }

    #[test]
    fn disaggregated_backend_carries_amplified_traffic() {
        let mut platform = ample_platform();
        platform.backend_net_bw = 1e9;
        let demand = basic_demand();
        let result = simulate(
            &platform,
            &basic_device(),
            &demand,
            &Scenario::disaggregated(None),
            1,
        )
        .unwrap();
        let backend_bytes_per_sec = result.utilization.backend_net * platform.backend_net_bw;
        let frontend_logical_per_sec = result.wops * demand.bytes_per_wo_frontend;
        let ratio = backend_bytes_per_sec / frontend_logical_per_sec;
        assert!((ratio - 6.0).abs() < 1e-9, "amplification ratio {ratio}");
    }

    #[test]
    fn connector_cap_binds_when_devices_saturate_the_slots() {
        let mut platform = ample_platform();
        platform.connectors = 4;
        let result = simulate(
            &platform,
            &basic_device(),
            &basic_demand(),
            &Scenario::integrated(),
            8,
        )
        .unwrap();
        assert_eq!(result.wops, 40_000.0);
        assert_eq!(result.binding_resource, Resource::Connectors);
        assert_eq!(result.utilization.connectors, 1.0);
        assert_eq!(result.devices_active, 4);
    }

    #[test]
    fn curve_flattens_at_the_cpu_crossover() {
        let device = basic_device();
        let mut demand = basic_demand();
        demand.mem_per_device = 0.0;
        let mut platform = ample_platform();
        // Crossover where n * media_wops = cpu_capacity / cycles: n = 5.
        platform.cpu_capacity = 5.0 * demand.cpu_cycles_per_wo * device.media_wops;
        let curve = mbwu_curve(&platform, &device, &demand, &Scenario::integrated(), 10).unwrap();
        for p in &curve {
            let expected = (p.n_devices as f64).min(5.0);
            assert!(
                (p.mbwus - expected).abs() < 1e-12,
                "n={} mbwus={}",
                p.n_devices,
                p.mbwus
            );
        }
    }

    #[test]
    fn single_point_curve_on_ample_platform() {
        let curve = mbwu_curve(
            &ample_platform(),
            &basic_device(),
            &basic_demand(),
            &Scenario::integrated(),
            1,
        )
        .unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(curve[0].n_devices, 1);
        assert_eq!(curve[0].mbwus, 1.0);
    }

    #[test]
    fn zero_cpu_capacity_is_rejected() {
        let mut platform = ample_platform();
        platform.cpu_capacity = 0.0;
        let err = simulate(
            &platform,
            &basic_device(),
            &basic_demand(),
            &Scenario::integrated(),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::InvalidSpec(_)));
    }

    #[test]
    fn platform_power_rating_consistency_is_enforced() {
        let mut platform = ample_platform();
        platform.amps = 3.0; // 360 W vs power_peak 200 W
        assert!(platform.validate().is_err());
    }
}
