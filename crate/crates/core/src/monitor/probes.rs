//! Probe implementations.
//!
//! A probe contributes whatever fields it can read each tick; the sampler
//! merges readings from the configured probe set. Three probes ship: the
//! OS-counter probe (kernel accounting files), the simulator probe (fed
//! from an analytic result), and the replay probe (re-reads a saved log).
//! A physical power meter would implement the same trait; none ships.

use std::fs;

use super::UtilizationSample;

/// Partial observation from one probe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeReading {
    pub cpu: Option<f64>,
    pub memory: Option<f64>,
    pub device_io: Option<Vec<f64>>,
    pub net_rx: Option<f64>,
    pub net_tx: Option<f64>,
    pub power: Option<f64>,
}

pub trait Probe: Send {
    fn name(&self) -> &'static str;
    /// `None` means the probe could not produce a reading this tick; the
    /// run continues in degraded mode.
    fn read(&mut self) -> Option<ProbeReading>;
}

/// Constant readings derived from a simulator result.
pub struct SimProbe {
    reading: ProbeReading,
}

impl SimProbe {
    pub fn new(reading: ProbeReading) -> Self {
        SimProbe { reading }
    }
}

impl Probe for SimProbe {
    fn name(&self) -> &'static str {
        "sim"
    }

    fn read(&mut self) -> Option<ProbeReading> {
        Some(self.reading.clone())
    }
}

/// Replays a previously recorded sample log.
pub struct ReplayProbe {
    samples: std::vec::IntoIter<UtilizationSample>,
}

impl ReplayProbe {
    pub fn new(samples: Vec<UtilizationSample>) -> Self {
        ReplayProbe {
            samples: samples.into_iter(),
        }
    }
}

impl Probe for ReplayProbe {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn read(&mut self) -> Option<ProbeReading> {
        let s = self.samples.next()?;
        Some(ProbeReading {
            cpu: Some(s.cpu),
            memory: Some(s.memory),
            device_io: Some(s.device_io),
            net_rx: Some(s.net_rx),
            net_tx: Some(s.net_tx),
            power: s.power,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CpuSnapshot {
    busy: u64,
    total: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct NetSnapshot {
    rx: u64,
    tx: u64,
}

/// Reads the kernel's accounting files: `/proc/stat` for CPU,
/// `/proc/meminfo` for memory, `/proc/net/dev` for network byte counters
/// (all interfaces, loopback included, so local daemons are visible), and
/// `/proc/diskstats` for the named block devices. Rates are deltas against
/// the previous tick; the constructor takes the first snapshot so the first
/// tick already has one. No power source.
pub struct OsProbe {
    disk_devices: Vec<String>,
    last_cpu: Option<CpuSnapshot>,
    last_net: Option<NetSnapshot>,
    last_disk: Option<Vec<u64>>,
    last_instant: std::time::Instant,
}

impl OsProbe {
    pub fn new(disk_devices: Vec<String>) -> Self {
        let mut probe = OsProbe {
            disk_devices,
            last_cpu: None,
            last_net: None,
            last_disk: None,
            last_instant: std::time::Instant::now(),
        };
        probe.last_cpu = probe.cpu_snapshot();
        probe.last_net = probe.net_snapshot();
        probe.last_disk = probe.disk_snapshot();
        probe
    }

    fn cpu_snapshot(&self) -> Option<CpuSnapshot> {
        let stat = fs::read_to_string("/proc/stat").ok()?;
        let line = stat.lines().find(|l| l.starts_with("cpu "))?;
        let fields: Vec<u64> = line
            .split_whitespace()
            .skip(1)
            .filter_map(|f| f.parse().ok())
            .collect();
        if fields.len() < 4 {
            return None;
        }
        let total: u64 = fields.iter().sum();
        let idle = fields[3] + fields.get(4).copied().unwrap_or(0); // idle + iowait
        Some(CpuSnapshot {
            busy: total - idle,
            total,
        })
    }

    fn memory_ratio(&self) -> Option<f64> {
        let meminfo = fs::read_to_string("/proc/meminfo").ok()?;
        let field = |name: &str| -> Option<f64> {
            meminfo
                .lines()
                .find(|l| l.starts_with(name))?
                .split_whitespace()
                .nth(1)?
                .parse()
                .ok()
        };
        let total = field("MemTotal:")?;
        let available = field("MemAvailable:").or_else(|| field("MemFree:"))?;
        if total <= 0.0 {
            return None;
        }
        Some(((total - available) / total).clamp(0.0, 1.0))
    }

    fn net_snapshot(&self) -> Option<NetSnapshot> {
        let dev = fs::read_to_string("/proc/net/dev").ok()?;
        let mut rx = 0u64;
        let mut tx = 0u64;
        for line in dev.lines().skip(2) {
            let Some((_, counters)) = line.split_once(':') else {
                continue;
            };
            let fields: Vec<u64> = counters
                .split_whitespace()
                .filter_map(|f| f.parse().ok())
                .collect();
            if fields.len() >= 9 {
                rx += fields[0];
                tx += fields[8];
            }
        }
        Some(NetSnapshot { rx, tx })
    }

    fn disk_snapshot(&self) -> Option<Vec<u64>> {
        if self.disk_devices.is_empty() {
            return Some(Vec::new());
        }
        let stats = fs::read_to_string("/proc/diskstats").ok()?;
        Some(
            self.disk_devices
                .iter()
                .map(|dev| {
                    stats
                        .lines()
                        .filter_map(|l| {
                            let fields: Vec<&str> = l.split_whitespace().collect();
                            if fields.len() >= 10 && fields[2] == dev {
                                let read_sectors: u64 = fields[5].parse().ok()?;
                                let write_sectors: u64 = fields[9].parse().ok()?;
                                Some((read_sectors + write_sectors) * 512)
                            } else {
                                None
                            }
                        })
                        .next()
                        .unwrap_or(0)
                })
                .collect(),
        )
    }
}

impl Probe for OsProbe {
    fn name(&self) -> &'static str {
        "os"
    }

    fn read(&mut self) -> Option<ProbeReading> {
        let dt = self.last_instant.elapsed().as_secs_f64().max(1e-6);
        self.last_instant = std::time::Instant::now();

        let cpu = match (self.cpu_snapshot(), self.last_cpu) {
            (Some(now), Some(prev)) if now.total > prev.total => {
                let ratio =
                    (now.busy - prev.busy) as f64 / (now.total - prev.total) as f64;
                self.last_cpu = Some(now);
                Some(ratio.clamp(0.0, 1.0))
            }
            (now, _) => {
                self.last_cpu = now;
                None
            }
        };
        let memory = self.memory_ratio();
        let (net_rx, net_tx) = match (self.net_snapshot(), self.last_net) {
            (Some(now), Some(prev)) => {
                let rx = now.rx.saturating_sub(prev.rx) as f64 / dt;
                let tx = now.tx.saturating_sub(prev.tx) as f64 / dt;
                self.last_net = Some(now);
                (Some(rx), Some(tx))
            }
            (now, _) => {
                self.last_net = now;
                (None, None)
            }
        };
        let device_io = match (self.disk_snapshot(), self.last_disk.take()) {
            (Some(now), Some(prev)) if now.len() == prev.len() => {
                let rates = now
                    .iter()
                    .zip(&prev)
                    .map(|(n, p)| n.saturating_sub(*p) as f64 / dt)
                    .collect();
                self.last_disk = Some(now);
                Some(rates)
            }
            (now, _) => {
                self.last_disk = now;
                None
            }
        };

        if cpu.is_none() && memory.is_none() && net_rx.is_none() && device_io.is_none() {
            return None;
        }
        Some(ProbeReading {
            cpu,
            memory,
            device_io,
            net_rx,
            net_tx,
            power: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_probe_repeats_its_reading() {
        let reading = ProbeReading {
            cpu: Some(0.5),
            memory: Some(0.25),
            device_io: Some(vec![100.0]),
            net_rx: Some(10.0),
            net_tx: Some(20.0),
            power: Some(75.0),
        };
        let mut probe = SimProbe::new(reading.clone());
        assert_eq!(probe.read(), Some(reading.clone()));
        assert_eq!(probe.read(), Some(reading));
    }

    #[test]
    fn replay_probe_exhausts_its_samples() {
        let samples = vec![UtilizationSample {
            timestamp: 1.0,
            cpu: 0.1,
            memory: 0.2,
            device_io: vec![],
            net_rx: 0.0,
            net_tx: 0.0,
            power: None,
        }];
        let mut probe = ReplayProbe::new(samples);
        assert!(probe.read().is_some());
        assert!(probe.read().is_none());
    }

    #[test]
    fn os_probe_reads_kernel_counters_when_present() {
        if !std::path::Path::new("/proc/stat").exists() {
            return;
        }
        let mut probe = OsProbe::new(vec![]);
        std::thread::sleep(std::time::Duration::from_millis(20));
        let reading = probe.read().expect("reading on a Linux host");
        if let Some(cpu) = reading.cpu {
            assert!((0.0..=1.0).contains(&cpu));
        }
        if let Some(mem) = reading.memory {
            assert!((0.0..=1.0).contains(&mem));
        }
        assert_eq!(reading.power, None);
    }
}
