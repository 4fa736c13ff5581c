//! Run backends for the sweeps.

use std::time::Duration;

use super::measure::{Executor, MeasuredRun};
use super::MeasureError;
use crate::digest::{sha256_bytes, sha256_json};
use crate::kvstore::{KvClient, StoreOptions, StoreStats};
use crate::monitor::{
    start_sampling, OsProbe, SummarizeContext, UtilizationSample,
};
use crate::simulator::{
    simulate, DeviceSpec, PlatformSpec, Scenario, ScenarioKind, Utilization, WorkloadDemand,
};
use crate::workload::{
    load_phase, run_phase, EndpointError, LatencyPercentiles, LoadReport, RunConfig, RunReport,
    WorkloadSpec,
};

/// Analytic backend: fabricates runs from the simulator in virtual time.
/// Request generation saturates the device once the per-replica thread
/// count reaches `thread_saturation`; below that it scales linearly, which
/// gives the thread sweep its knee. External caching never boosts
/// throughput in this model, so the unit-measurement caching policy holds
/// by construction.
pub struct SimExecutor {
    pub platform: PlatformSpec,
    pub device: DeviceSpec,
    pub demand: WorkloadDemand,
    pub scenario: Scenario,
    pub thread_saturation: u32,
}

impl SimExecutor {
    pub fn new(
        platform: PlatformSpec,
        device: DeviceSpec,
        demand: WorkloadDemand,
        scenario: Scenario,
    ) -> Self {
        let thread_saturation = (device.queue_depth / 4).max(1);
        SimExecutor {
            platform,
            device,
            demand,
            scenario,
            thread_saturation,
        }
    }

    fn effective_connectors(&self) -> u32 {
        self.scenario
            .connector_override
            .unwrap_or(self.platform.connectors)
    }
}

fn split_ops(total: u64, threads: u32) -> Vec<u64> {
    let threads = threads.max(1) as u64;
    let base = total / threads;
    let extra = (total % threads) as usize;
    (0..threads as usize)
        .map(|i| base + u64::from(i < extra))
        .collect()
}

impl Executor for SimExecutor {
    fn media_id(&self) -> String {
        format!("sim-{}", &sha256_json(&self.device)[..16])
    }

    fn queue_depth(&self) -> u32 {
        self.device.queue_depth
    }

    fn max_devices(&self) -> u32 {
        self.effective_connectors()
    }

    fn run(
        &mut self,
        spec: &WorkloadSpec,
        threads: u32,
        n_devices: u32,
        duration: f64,
        sample_interval: f64,
    ) -> Result<MeasuredRun, MeasureError> {
        spec.validate()?;
        let sim = simulate(
            &self.platform,
            &self.device,
            &self.demand,
            &self.scenario,
            n_devices,
        )?;
        let saturation = (threads as f64 / self.thread_saturation as f64).min(1.0);
        let generation_cap = n_devices as f64 * self.device.media_wops * saturation;
        let wops = sim.wops.min(generation_cap);
        let scale = if sim.wops > 0.0 { wops / sim.wops } else { 0.0 };
        let utilization = Utilization {
            cpu: sim.utilization.cpu * scale,
            memory: sim.utilization.memory,
            frontend_net: sim.utilization.frontend_net * scale,
            backend_net: sim.utilization.backend_net * scale,
            device: sim.utilization.device * scale,
            connectors: sim.utilization.connectors,
        };
        let platform_load = utilization
            .cpu
            .max(utilization.memory)
            .max(utilization.frontend_net)
            .max(utilization.backend_net)
            .clamp(0.0, 1.0);
        let power = self.platform.power_idle
            + (self.platform.power_peak - self.platform.power_idle) * platform_load
            + sim.devices_active as f64 * self.device.power_active;

        // Integer op accounting over virtual ticks.
        let ticks = ((duration / sample_interval).round() as usize).max(1);
        let per_tick = wops * sample_interval;
        let mut buckets = Vec::with_capacity(ticks);
        let mut emitted = 0u64;
        for i in 1..=ticks {
            let upto = (i as f64 * per_tick).floor() as u64;
            buckets.push(upto - emitted);
            emitted = upto;
        }
        let elapsed = ticks as f64 * sample_interval;
        let latency_us = if wops > 0.0 {
            (threads as f64 * n_devices as f64 / wops * 1e6) as u64
        } else {
            0
        };
        let report = RunReport {
            total_ops: emitted,
            elapsed,
            wops: if emitted == 0 {
                0.0
            } else {
                emitted as f64 / elapsed
            },
            latency_percentiles: LatencyPercentiles {
                p50: latency_us,
                p95: latency_us,
                p99: latency_us,
            },
            per_thread_ops: split_ops(emitted, threads),
            throughput_series: buckets
                .iter()
                .enumerate()
                .map(|(i, &ops)| ((i + 1) as f64 * sample_interval, ops))
                .collect(),
        };

        let crosses_network = self.scenario.kind != ScenarioKind::Integrated;
        let frontend_rate = if crosses_network {
            wops * self.demand.bytes_per_wo_frontend
        } else {
            0.0
        };
        let backend_rate = if self.scenario.kind == ScenarioKind::Disaggregated {
            wops * self.demand.bytes_per_wo_frontend * self.demand.amplification
        } else {
            0.0
        };
        let per_device_io = wops * self.device.bytes_per_wo_device / sim.devices_active as f64;
        let samples: Vec<UtilizationSample> = (1..=ticks)
            .map(|i| UtilizationSample {
                timestamp: i as f64 * sample_interval,
                cpu: utilization.cpu,
                memory: utilization.memory,
                device_io: vec![per_device_io; sim.devices_active as usize],
                net_rx: frontend_rate,
                net_tx: backend_rate,
                power: Some(power),
            })
            .collect();

        let monitor_ctx = SummarizeContext {
            frontend_net_bw: Some(self.platform.frontend_net_bw),
            backend_net_bw: Some(self.platform.backend_net_bw),
            device_io_capacity: Some(self.device.media_wops * self.device.bytes_per_wo_device),
            device_count: sim.devices_active as usize,
            connector_cap: Some(self.effective_connectors() as usize),
            bottleneck_threshold: 0.9,
        };
        Ok(MeasuredRun {
            report,
            samples,
            monitor_ctx,
        })
    }
}

/// Live backend: one daemon endpoint per storage device. The store is
/// loaded once per endpoint and held open across sweep points; each run
/// spawns `threads` workers per replica, each with its own connection and
/// seeded stream, while the OS probe samples in the background.
///
/// Unit measurement expects external caching defeated: pass store options
/// with `memory_budget: 0` (the engine then serves every read from the
/// device path). Whatever the OS page cache does underneath is outside this
/// process's control and documented as a limitation of file-backed devices.
pub struct LiveExecutor {
    endpoints: Vec<String>,
    store_options: StoreOptions,
    queue_depth: u32,
    disk_devices: Vec<String>,
    control: Vec<KvClient>,
    load_reports: Vec<LoadReport>,
    loaded_digest: Option<String>,
}

impl LiveExecutor {
    pub fn new(endpoints: Vec<String>, store_options: StoreOptions, queue_depth: u32) -> Self {
        LiveExecutor {
            endpoints,
            store_options,
            queue_depth,
            disk_devices: Vec::new(),
            control: Vec::new(),
            load_reports: Vec::new(),
            loaded_digest: None,
        }
    }

    /// Block device names (as in kernel disk accounting) backing the
    /// endpoints, enabling per-device I/O sampling.
    pub fn with_disk_devices(mut self, disk_devices: Vec<String>) -> Self {
        self.disk_devices = disk_devices;
        self
    }

    /// Loads every endpoint's store once; later calls for the same workload
    /// are no-ops. PUT traffic in run phases overwrites existing keys, so
    /// the record count stays fixed after the load.
    pub fn ensure_loaded(&mut self, spec: &WorkloadSpec) -> Result<(), MeasureError> {
        let digest = spec.digest();
        if self.loaded_digest.as_ref() == Some(&digest) {
            return Ok(());
        }
        if self.loaded_digest.is_some() {
            return Err(MeasureError::MeasurementFailed(
                "executor already loaded with a different workload".into(),
            ));
        }
        for addr in self.endpoints.clone() {
            let mut control = KvClient::connect(addr.as_str())?;
            control.open(&self.store_options)?;
            let report = load_phase(&mut control, spec)?;
            self.load_reports.push(report);
            self.control.push(control);
        }
        self.loaded_digest = Some(digest);
        Ok(())
    }

    pub fn load_reports(&self) -> &[LoadReport] {
        &self.load_reports
    }

    /// Engine counters per endpoint, including write amplification.
    pub fn store_stats(&mut self) -> Result<Vec<StoreStats>, MeasureError> {
        self.control
            .iter_mut()
            .map(|c| c.status().map_err(MeasureError::from))
            .collect()
    }
}

impl Executor for LiveExecutor {
    fn media_id(&self) -> String {
        format!("live-{}", &sha256_bytes(self.endpoints.join(",").as_bytes())[..16])
    }

    fn queue_depth(&self) -> u32 {
        self.queue_depth
    }

    fn max_devices(&self) -> u32 {
        self.endpoints.len() as u32
    }

    fn run(
        &mut self,
        spec: &WorkloadSpec,
        threads: u32,
        n_devices: u32,
        duration: f64,
        sample_interval: f64,
    ) -> Result<MeasuredRun, MeasureError> {
        if n_devices < 1 || n_devices as usize > self.endpoints.len() {
            return Err(MeasureError::MeasurementFailed(format!(
                "{n_devices} devices requested but {} endpoints configured",
                self.endpoints.len()
            )));
        }
        self.ensure_loaded(spec)?;

        let sampler = start_sampling(
            Duration::from_secs_f64(sample_interval),
            vec![Box::new(OsProbe::new(self.disk_devices.clone()))],
        )?;
        let endpoints = self.endpoints.clone();
        let options = self.store_options.clone();
        let connect = move |worker: usize| -> Result<KvClient, EndpointError> {
            let addr = &endpoints[worker % n_devices as usize];
            let mut client = KvClient::connect(addr.as_str()).map_err(EndpointError::from)?;
            client.open(&options).map_err(EndpointError::from)?;
            Ok(client)
        };
        let report = run_phase(
            &connect,
            spec,
            threads * n_devices,
            duration,
            &RunConfig { sample_interval },
        )?;
        let log = sampler.stop();

        Ok(MeasuredRun {
            report,
            samples: log.samples,
            monitor_ctx: SummarizeContext::bare(
                n_devices as usize,
                Some(self.endpoints.len()),
            ),
        })
    }
}
