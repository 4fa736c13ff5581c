//! Load and run phases.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::keygen::{encode_key, splitmix64};
use super::rate::TokenBucket;
use super::stream::OpStream;
use super::{EndpointError, KvEndpoint, WorkloadError, WorkloadOp, WorkloadSpec};

/// Service-time percentiles in microseconds. Latencies are recorded per
/// operation as observed by the issuing worker; there is no coordinated
/// omission correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyPercentiles {
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
}

/// Outcome of a load or run phase.
///
/// Counts are integers end to end: `total_ops == sum(per_thread_ops)` and
/// `wops` is derived as `total_ops / elapsed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub total_ops: u64,
    /// Wall-clock seconds.
    pub elapsed: f64,
    /// Workload operations per second.
    pub wops: f64,
    pub latency_percentiles: LatencyPercentiles,
    pub per_thread_ops: Vec<u64>,
    /// `(timestamp_s, ops completed in the interval ending there)`.
    pub throughput_series: Vec<(f64, u64)>,
}

pub type LoadReport = RunReport;

impl RunReport {
    /// Per-interval throughput in ops/second.
    pub fn rate_series(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.throughput_series
            .iter()
            .map(|&(t, ops)| {
                let dt = (t - prev).max(f64::MIN_POSITIVE);
                prev = t;
                ops as f64 / dt
            })
            .collect()
    }

    /// Writes the throughput series as `timestamp_s,ops` CSV.
    pub fn write_throughput_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp_s", "ops"])?;
        for (t, ops) in &self.throughput_series {
            w.write_record([t.to_string(), ops.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-worker outcome attached to partial-run errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkerStatus {
    pub worker: usize,
    pub ops: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Throughput sampling interval in seconds.
    pub sample_interval: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sample_interval: 1.0,
        }
    }
}

fn percentile(sorted: &[u32], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as u64
}

fn summarize_latencies(mut all: Vec<u32>) -> LatencyPercentiles {
    all.sort_unstable();
    LatencyPercentiles {
        p50: percentile(&all, 0.50),
        p95: percentile(&all, 0.95),
        p99: percentile(&all, 0.99),
    }
}

fn merge_buckets(per_worker: &[Vec<u64>], interval: f64) -> Vec<(f64, u64)> {
    let len = per_worker.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let ops = per_worker.iter().map(|b| b.get(i).copied().unwrap_or(0)).sum();
            ((i + 1) as f64 * interval, ops)
        })
        .collect()
}

/// Seed for one worker's operation stream; workers draw from disjoint
/// deterministic streams.
pub fn worker_seed(base: u64, worker: usize) -> u64 {
    splitmix64(splitmix64(base) ^ (worker as u64 + 1))
}

/// Inserts all records into the endpoint. Insertion order is record index
/// order; values are drawn deterministically from the spec seed, so two
/// loads of the same spec produce identical stores regardless of rate
/// limiting.
pub fn load_phase<E: KvEndpoint>(
    endpoint: &mut E,
    spec: &WorkloadSpec,
) -> Result<LoadReport, WorkloadError> {
    spec.validate()?;
    let record_count = spec.resolved_record_count()?;
    let key_size = spec.key_size as usize;
    let mut value = vec![0u8; spec.value_size as usize];
    let mut value_rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x6c6f6164));

    let start = Instant::now();
    let mut bucket = spec
        .load_rate_limit
        .map(|limit| TokenBucket::per_second(limit, 0.0));
    let interval = 1.0;
    let mut buckets: Vec<u64> = Vec::new();
    let mut latencies: Vec<u32> = Vec::with_capacity(record_count.min(1 << 20) as usize);

    for index in 0..record_count {
        if let Some(b) = &mut bucket {
            loop {
                let now = start.elapsed().as_secs_f64();
                if b.try_take(now) {
                    break;
                }
                let wait = b.next_available_in(now);
                std::thread::sleep(Duration::from_secs_f64(wait.clamp(1e-5, 0.05)));
            }
        }
        let key = encode_key(index, key_size);
        value_rng.fill(&mut value[..]);
        let op_start = Instant::now();
        endpoint.put(&key, &value).map_err(|source| {
            WorkloadError::AbortedLoad {
                loaded: index,
                total: record_count,
                source,
            }
        })?;
        latencies.push(op_start.elapsed().as_micros().min(u32::MAX as u128) as u32);
        let slot = (op_start.duration_since(start).as_secs_f64() / interval) as usize;
        if buckets.len() <= slot {
            buckets.resize(slot + 1, 0);
        }
        buckets[slot] += 1;
    }

    let elapsed = start.elapsed().as_secs_f64();
    let wops = if record_count == 0 || elapsed <= 0.0 {
        0.0
    } else {
        record_count as f64 / elapsed
    };
    Ok(RunReport {
        total_ops: record_count,
        elapsed,
        wops,
        latency_percentiles: summarize_latencies(latencies),
        per_thread_ops: vec![record_count],
        throughput_series: merge_buckets(&[buckets], interval),
    })
}

/// Connector handed to [`run_phase`]: builds worker `i`'s endpoint.
pub type ConnectFn<'a, E> = dyn Fn(usize) -> Result<E, EndpointError> + Sync + 'a;

struct WorkerLog {
    ops: u64,
    latencies: Vec<u32>,
    buckets: Vec<u64>,
    error: Option<String>,
}

fn run_worker<E: KvEndpoint>(
    connect: &ConnectFn<'_, E>,
    worker: usize,
    spec: &WorkloadSpec,
    deadline: Duration,
    start: Instant,
    interval: f64,
) -> WorkerLog {
    let mut log = WorkerLog {
        ops: 0,
        latencies: Vec::new(),
        buckets: Vec::new(),
        error: None,
    };
    let mut endpoint = match connect(worker) {
        Ok(ep) => ep,
        Err(e) => {
            log.error = Some(e.to_string());
            return log;
        }
    };
    let mut stream = match OpStream::unbounded(spec, worker_seed(spec.seed, worker)) {
        Ok(s) => s,
        Err(e) => {
            log.error = Some(e.to_string());
            return log;
        }
    };
    while start.elapsed() < deadline {
        let op = stream.next().expect("unbounded stream");
        let op_start = Instant::now();
        let result = match &op {
            WorkloadOp::Get { key } => endpoint.get(key).map(|_| ()),
            WorkloadOp::Put { key, value } => endpoint.put(key, value),
            WorkloadOp::Delete { key } => endpoint.delete(key).map(|_| ()),
        };
        if let Err(e) = result {
            log.error = Some(e.to_string());
            return log;
        }
        log.ops += 1;
        log.latencies
            .push(op_start.elapsed().as_micros().min(u32::MAX as u128) as u32);
        let slot = (op_start.duration_since(start).as_secs_f64() / interval) as usize;
        if log.buckets.len() <= slot {
            log.buckets.resize(slot + 1, 0);
        }
        log.buckets[slot] += 1;
    }
    log
}

/// Runs `threads` independent workers against the endpoint for `duration`
/// seconds. Worker `i` gets its own connection from `connect` and its own
/// seeded stream; aggregation happens after all workers stop.
pub fn run_phase<E: KvEndpoint>(
    connect: &ConnectFn<'_, E>,
    spec: &WorkloadSpec,
    threads: u32,
    duration: f64,
    config: &RunConfig,
) -> Result<RunReport, WorkloadError> {
    spec.validate()?;
    if threads == 0 {
        return Err(WorkloadError::InvalidSpec("threads must be >= 1".into()));
    }
    let interval = config.sample_interval;
    if !(interval > 0.0) {
        return Err(WorkloadError::InvalidSpec(
            "sample_interval must be positive".into(),
        ));
    }
    let deadline = Duration::from_secs_f64(duration.max(0.0));
    let start = Instant::now();

    let logs: Vec<WorkerLog> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads as usize)
            .map(|w| scope.spawn(move || run_worker(connect, w, spec, deadline, start, interval)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let elapsed = start.elapsed().as_secs_f64();

    let failed = logs.iter().filter(|l| l.error.is_some()).count();
    if failed > 0 {
        let statuses = logs
            .iter()
            .enumerate()
            .map(|(worker, l)| WorkerStatus {
                worker,
                ops: l.ops,
                error: l.error.clone(),
            })
            .collect();
        return Err(WorkloadError::PartialRun {
            failed,
            total: logs.len(),
            statuses,
        });
    }

    let per_thread_ops: Vec<u64> = logs.iter().map(|l| l.ops).collect();
    let total_ops: u64 = per_thread_ops.iter().sum();
    let all_latencies: Vec<u32> = logs.iter().flat_map(|l| l.latencies.iter().copied()).collect();
    let bucket_sets: Vec<Vec<u64>> = logs.into_iter().map(|l| l.buckets).collect();
    let wops = if total_ops == 0 || elapsed <= 0.0 {
        0.0
    } else {
        total_ops as f64 / elapsed
    };
    Ok(RunReport {
        total_ops,
        elapsed,
        wops,
        latency_percentiles: summarize_latencies(all_latencies),
        per_thread_ops,
        throughput_series: merge_buckets(&bucket_sets, interval),
    })
}
