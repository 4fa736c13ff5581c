//! Background sampling loop.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::probes::Probe;
use super::{MonitorError, UtilizationSample};

/// Everything the sampler recorded, returned by [`Sampler::stop`].
#[derive(Debug, Clone)]
pub struct SampleLog {
    pub samples: Vec<UtilizationSample>,
    /// Probes that never produced a reading.
    pub absent_probes: Vec<String>,
}

pub struct Sampler {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<SampleLog>>,
}

impl Sampler {
    /// Signals the loop and returns the complete log.
    pub fn stop(mut self) -> SampleLog {
        self.stop.store(true, Ordering::SeqCst);
        self.thread
            .take()
            .expect("sampler stopped twice")
            .join()
            .expect("sampler thread panicked")
    }
}

impl Drop for Sampler {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn merge_tick(
    timestamp: f64,
    probes: &mut [(Box<dyn Probe>, bool)],
) -> UtilizationSample {
    let mut sample = UtilizationSample {
        timestamp,
        cpu: 0.0,
        memory: 0.0,
        device_io: Vec::new(),
        net_rx: 0.0,
        net_tx: 0.0,
        power: None,
    };
    let mut have = ProbeFields::default();
    for (probe, ever_read) in probes.iter_mut() {
        let Some(reading) = probe.read() else {
            continue;
        };
        *ever_read = true;
        if let (Some(v), false) = (reading.cpu, have.cpu) {
            sample.cpu = v;
            have.cpu = true;
        }
        if let (Some(v), false) = (reading.memory, have.memory) {
            sample.memory = v;
            have.memory = true;
        }
        if let (Some(v), false) = (reading.device_io, have.device_io) {
            sample.device_io = v;
            have.device_io = true;
        }
        if let (Some(v), false) = (reading.net_rx, have.net_rx) {
            sample.net_rx = v;
            have.net_rx = true;
        }
        if let (Some(v), false) = (reading.net_tx, have.net_tx) {
            sample.net_tx = v;
            have.net_tx = true;
        }
        if sample.power.is_none() {
            sample.power = reading.power;
        }
    }
    sample
}

#[derive(Default)]
struct ProbeFields {
    cpu: bool,
    memory: bool,
    device_io: bool,
    net_rx: bool,
    net_tx: bool,
}

/// Starts sampling the probe set at `interval` on a background thread.
/// Samples accumulate in the sampler's own log; a probe that cannot read is
/// skipped, never aborting the run.
pub fn start_sampling(
    interval: Duration,
    probes: Vec<Box<dyn Probe>>,
) -> Result<Sampler, MonitorError> {
    if interval.is_zero() {
        return Err(MonitorError::InvalidInterval);
    }
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = stop.clone();
    let thread = std::thread::spawn(move || {
        let mut probes: Vec<(Box<dyn Probe>, bool)> =
            probes.into_iter().map(|p| (p, false)).collect();
        let mut samples = Vec::new();
        let start = Instant::now();
        let mut tick = 1u64;
        loop {
            let next = interval * tick as u32;
            while start.elapsed() < next {
                if stop_flag.load(Ordering::SeqCst) {
                    return finish(samples, probes);
                }
                let remaining = next.saturating_sub(start.elapsed());
                std::thread::sleep(remaining.min(Duration::from_millis(5)));
            }
            if stop_flag.load(Ordering::SeqCst) {
                return finish(samples, probes);
            }
            let timestamp = start.elapsed().as_secs_f64();
            samples.push(merge_tick(timestamp, &mut probes));
            tick += 1;
        }
    });
    Ok(Sampler {
        stop,
        thread: Some(thread),
    })
}

fn finish(samples: Vec<UtilizationSample>, probes: Vec<(Box<dyn Probe>, bool)>) -> SampleLog {
    let absent_probes = probes
        .iter()
        .filter(|(_, ever)| !ever)
        .map(|(p, _)| p.name().to_string())
        .collect();
    SampleLog {
        samples,
        absent_probes,
    }
}
