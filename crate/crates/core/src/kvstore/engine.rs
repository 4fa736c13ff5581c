//! Append-log key-value engine.
//!
//! One log file per store. Records are `[key_len: u32][value_tag: u32]
//! [key][value]` where a value tag of `u32::MAX` marks a tombstone. The
//! whole index lives in memory; compaction rewrites live records into a
//! fresh log when dead bytes pass a threshold. The engine counts logical
//! PUT bytes and bytes written to the device so write amplification is
//! observable.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_json;

const LOG_MAGIC: &[u8; 8] = b"MBKV0001";
const TOMBSTONE: u32 = u32::MAX;
const MAX_KEY_LEN: u32 = 64 * 1024;
const MAX_VALUE_LEN: u32 = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log: {0}")]
    Corrupt(String),
    #[error("store has served no PUT traffic; write amplification is undefined")]
    NoTraffic,
}

/// Engine configuration. The digest covers the behavioral fields
/// (`sync_on_put`, `memory_budget`) so that the same tuning produces the
/// same digest on every platform regardless of where the data lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreOptions {
    pub data_dir: PathBuf,
    pub sync_on_put: bool,
    /// Byte budget for the in-memory value cache; 0 disables caching, the
    /// setting used when external caching must be defeated.
    pub memory_budget: u64,
    #[serde(default)]
    pub options_digest: String,
}

impl StoreOptions {
    pub fn new(data_dir: impl Into<PathBuf>, sync_on_put: bool, memory_budget: u64) -> Self {
        let mut opts = StoreOptions {
            data_dir: data_dir.into(),
            sync_on_put,
            memory_budget,
            options_digest: String::new(),
        };
        opts.options_digest = opts.compute_digest();
        opts
    }

    pub fn compute_digest(&self) -> String {
        #[derive(Serialize)]
        struct Behavior {
            sync_on_put: bool,
            memory_budget: u64,
        }
        sha256_json(&Behavior {
            sync_on_put: self.sync_on_put,
            memory_budget: self.memory_budget,
        })
    }

    /// Fills in the digest if the file omitted it.
    pub fn ensure_digest(mut self) -> Self {
        if self.options_digest.is_empty() {
            self.options_digest = self.compute_digest();
        }
        self
    }

    pub fn digest_matches(&self) -> bool {
        self.options_digest == self.compute_digest()
    }
}

/// Monotonic engine counters for the current session.
#[derive(Debug, Default)]
pub struct EngineStats {
    pub puts: AtomicU64,
    pub gets: AtomicU64,
    pub deletes: AtomicU64,
    pub logical_put_bytes: AtomicU64,
    pub device_bytes_written: AtomicU64,
    pub compactions: AtomicU64,
}

/// Serializable snapshot of [`EngineStats`] plus derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreStats {
    pub puts: u64,
    pub gets: u64,
    pub deletes: u64,
    pub records: u64,
    pub logical_put_bytes: u64,
    pub device_bytes_written: u64,
    pub compactions: u64,
    /// None until the store has received PUT traffic.
    pub write_amplification: Option<f64>,
}

/// When to fold dead bytes out of the log.
#[derive(Debug, Clone, Copy)]
pub struct CompactPolicy {
    pub min_dead_bytes: u64,
    pub dead_to_live_ratio: f64,
}

impl Default for CompactPolicy {
    fn default() -> Self {
        CompactPolicy {
            min_dead_bytes: 256 * 1024 * 1024,
            dead_to_live_ratio: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ValueLocation {
    value_offset: u64,
    value_len: u32,
}

struct ValueCache {
    budget: u64,
    used: u64,
    map: HashMap<Vec<u8>, Vec<u8>>,
    order: VecDeque<Vec<u8>>,
}

impl ValueCache {
    fn new(budget: u64) -> Self {
        ValueCache {
            budget,
            used: 0,
            map: HashMap::new(),
            order: VecDeque::new(),
        }
    }

    fn get(&self, key: &[u8]) -> Option<Vec<u8>> {
        self.map.get(key).cloned()
    }

    fn insert(&mut self, key: &[u8], value: &[u8]) {
        let size = (key.len() + value.len()) as u64;
        if size > self.budget {
            self.remove(key);
            return;
        }
        self.remove(key);
        while self.used + size > self.budget {
            let Some(old) = self.order.pop_front() else {
                break;
            };
            if let Some(v) = self.map.remove(&old) {
                self.used -= (old.len() + v.len()) as u64;
            }
        }
        self.used += size;
        self.order.push_back(key.to_vec());
        self.map.insert(key.to_vec(), value.to_vec());
    }

    fn remove(&mut self, key: &[u8]) {
        if let Some(v) = self.map.remove(key) {
            self.used -= (key.len() + v.len()) as u64;
            self.order.retain(|k| k != key);
        }
    }
}

pub struct Engine {
    log_path: PathBuf,
    log: File,
    options: StoreOptions,
    index: HashMap<Vec<u8>, ValueLocation>,
    log_len: u64,
    live_bytes: u64,
    dead_bytes: u64,
    stats: EngineStats,
    cache: Option<Mutex<ValueCache>>,
    compact_policy: Option<CompactPolicy>,
}

fn record_len(key_len: usize, value_len: usize) -> u64 {
    8 + key_len as u64 + value_len as u64
}

impl Engine {
    /// Opens (or creates) the store under `options.data_dir`, replaying the
    /// log to rebuild the index. A truncated tail record is dropped; an
    /// inconsistent record in the middle of the log is an error.
    pub fn open(options: StoreOptions) -> Result<Engine, EngineError> {
        let options = options.ensure_digest();
        std::fs::create_dir_all(&options.data_dir)?;
        let log_path = options.data_dir.join("store.log");
        let mut log = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&log_path)?;

        let mut engine = Engine {
            log_path,
            cache: match options.memory_budget {
                0 => None,
                budget => Some(Mutex::new(ValueCache::new(budget))),
            },
            options,
            index: HashMap::new(),
            log_len: 0,
            live_bytes: 0,
            dead_bytes: 0,
            stats: EngineStats::default(),
            compact_policy: Some(CompactPolicy::default()),
            log: log.try_clone()?,
        };
        engine.replay(&mut log)?;
        Ok(engine)
    }

    fn replay(&mut self, log: &mut File) -> Result<(), EngineError> {
        let file_len = log.metadata()?.len();
        let mut reader = BufReader::new(log);
        let mut pos: u64 = 0;

        if file_len == 0 {
            self.log.write_all(LOG_MAGIC)?;
            self.log_len = LOG_MAGIC.len() as u64;
            self.stats
                .device_bytes_written
                .fetch_add(LOG_MAGIC.len() as u64, Ordering::Relaxed);
            return Ok(());
        }
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic)?;
        if &magic != LOG_MAGIC {
            return Err(EngineError::Corrupt("bad magic".into()));
        }
        pos += 8;

        while pos < file_len {
            let mut header = [0u8; 8];
            if reader.read_exact(&mut header).is_err() {
                break; // truncated tail header
            }
            let key_len = u32::from_le_bytes(header[..4].try_into().unwrap());
            let value_tag = u32::from_le_bytes(header[4..].try_into().unwrap());
            if key_len > MAX_KEY_LEN {
                return Err(EngineError::Corrupt(format!(
                    "key length {key_len} at offset {pos}"
                )));
            }
            let value_len = if value_tag == TOMBSTONE { 0 } else { value_tag };
            if value_len > MAX_VALUE_LEN {
                return Err(EngineError::Corrupt(format!(
                    "value length {value_len} at offset {pos}"
                )));
            }
            let body = key_len as u64 + value_len as u64;
            if pos + 8 + body > file_len {
                break; // truncated tail body
            }
            let mut key = vec![0u8; key_len as usize];
            reader.read_exact(&mut key)?;
            let mut skip = vec![0u8; value_len as usize];
            reader.read_exact(&mut skip)?;

            let this_len = record_len(key_len as usize, value_len as usize);
            if value_tag == TOMBSTONE {
                if let Some(old) = self.index.remove(&key) {
                    let old_len = record_len(key.len(), old.value_len as usize);
                    self.live_bytes -= old_len;
                    self.dead_bytes += old_len;
                }
                self.dead_bytes += this_len;
            } else {
                let loc = ValueLocation {
                    value_offset: pos + 8 + key_len as u64,
                    value_len,
                };
                if let Some(old) = self.index.insert(key.clone(), loc) {
                    let old_len = record_len(key.len(), old.value_len as usize);
                    self.live_bytes -= old_len;
                    self.dead_bytes += old_len;
                }
                self.live_bytes += this_len;
            }
            pos += 8 + body;
        }

        if pos < file_len {
            // Drop the truncated tail so future appends start clean.
            self.log.set_len(pos)?;
        }
        self.log_len = pos;
        Ok(())
    }

    pub fn options(&self) -> &StoreOptions {
        &self.options
    }

    pub fn record_count(&self) -> u64 {
        self.index.len() as u64
    }

    pub fn put(&mut self, key: &[u8], value: &[u8]) -> Result<(), EngineError> {
        let mut record = Vec::with_capacity(8 + key.len() + value.len());
        record.extend_from_slice(&(key.len() as u32).to_le_bytes());
        record.extend_from_slice(&(value.len() as u32).to_le_bytes());
        record.extend_from_slice(key);
        record.extend_from_slice(value);
        self.log.write_all(&record)?;
        if self.options.sync_on_put {
            self.log.sync_data()?;
        }

        let this_len = record.len() as u64;
        let loc = ValueLocation {
            value_offset: self.log_len + 8 + key.len() as u64,
            value_len: value.len() as u32,
        };
        self.log_len += this_len;
        if let Some(old) = self.index.insert(key.to_vec(), loc) {
            let old_len = record_len(key.len(), old.value_len as usize);
            self.live_bytes -= old_len;
            self.dead_bytes += old_len;
        }
        self.live_bytes += this_len;
        self.stats.puts.fetch_add(1, Ordering::Relaxed);
        self.stats
            .logical_put_bytes
            .fetch_add((key.len() + value.len()) as u64, Ordering::Relaxed);
        self.stats
            .device_bytes_written
            .fetch_add(this_len, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().insert(key, value);
        }
        self.maybe_compact()?;
        Ok(())
    }

    pub fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>, EngineError> {
        self.stats.gets.fetch_add(1, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().unwrap().get(key) {
                return Ok(Some(hit));
            }
        }
        let Some(loc) = self.index.get(key) else {
            return Ok(None);
        };
        let mut value = vec![0u8; loc.value_len as usize];
        self.log.read_exact_at(&mut value, loc.value_offset)?;
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().insert(key, &value);
        }
        Ok(Some(value))
    }

    /// Returns whether the key existed. Deleting an absent key writes
    /// nothing.
    pub fn delete(&mut self, key: &[u8]) -> Result<bool, EngineError> {
        self.stats.deletes.fetch_add(1, Ordering::Relaxed);
        let Some(old) = self.index.remove(key) else {
            return Ok(false);
        };
        let mut record = Vec::with_capacity(8 + key.len());
        record.extend_from_slice(&(key.len() as u32).to_le_bytes());
        record.extend_from_slice(&TOMBSTONE.to_le_bytes());
        record.extend_from_slice(key);
        self.log.write_all(&record)?;
        if self.options.sync_on_put {
            self.log.sync_data()?;
        }
        let old_len = record_len(key.len(), old.value_len as usize);
        self.live_bytes -= old_len;
        self.dead_bytes += old_len + record.len() as u64;
        self.log_len += record.len() as u64;
        self.stats
            .device_bytes_written
            .fetch_add(record.len() as u64, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().remove(key);
        }
        self.maybe_compact()?;
        Ok(true)
    }

    /// Bytes written to the device divided by logical PUT bytes received.
    pub fn write_amplification(&self) -> Result<f64, EngineError> {
        let logical = self.stats.logical_put_bytes.load(Ordering::Relaxed);
        if logical == 0 {
            return Err(EngineError::NoTraffic);
        }
        let device = self.stats.device_bytes_written.load(Ordering::Relaxed);
        Ok(device as f64 / logical as f64)
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats {
            puts: self.stats.puts.load(Ordering::Relaxed),
            gets: self.stats.gets.load(Ordering::Relaxed),
            deletes: self.stats.deletes.load(Ordering::Relaxed),
            records: self.index.len() as u64,
            logical_put_bytes: self.stats.logical_put_bytes.load(Ordering::Relaxed),
            device_bytes_written: self.stats.device_bytes_written.load(Ordering::Relaxed),
            compactions: self.stats.compactions.load(Ordering::Relaxed),
            write_amplification: self.write_amplification().ok(),
        }
    }

    pub fn set_compact_policy(&mut self, policy: Option<CompactPolicy>) {
        self.compact_policy = policy;
    }

    fn maybe_compact(&mut self) -> Result<(), EngineError> {
        if let Some(policy) = self.compact_policy {
            if self.dead_bytes >= policy.min_dead_bytes
                && self.dead_bytes as f64 >= policy.dead_to_live_ratio * self.live_bytes as f64
            {
                self.compact()?;
            }
        }
        Ok(())
    }

    /// Rewrites live records into a fresh log and swaps it in.
    pub fn compact(&mut self) -> Result<(), EngineError> {
        let tmp_path = self.log_path.with_extension("log.compact");
        let mut tmp = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&tmp_path)?;
        let mut written: u64 = 0;
        tmp.write_all(LOG_MAGIC)?;
        written += LOG_MAGIC.len() as u64;

        let mut new_index = HashMap::with_capacity(self.index.len());
        // Stable order keeps rewritten logs byte-identical across runs.
        let mut keys: Vec<&Vec<u8>> = self.index.keys().collect();
        keys.sort();
        for key in keys {
            let loc = self.index[key.as_slice()];
            let mut value = vec![0u8; loc.value_len as usize];
            self.log.read_exact_at(&mut value, loc.value_offset)?;
            let mut record = Vec::with_capacity(8 + key.len() + value.len());
            record.extend_from_slice(&(key.len() as u32).to_le_bytes());
            record.extend_from_slice(&(value.len() as u32).to_le_bytes());
            record.extend_from_slice(key);
            record.extend_from_slice(&value);
            tmp.write_all(&record)?;
            new_index.insert(
                key.clone(),
                ValueLocation {
                    value_offset: written + 8 + key.len() as u64,
                    value_len: loc.value_len,
                },
            );
            written += record.len() as u64;
        }
        tmp.sync_all()?;
        std::fs::rename(&tmp_path, &self.log_path)?;

        self.log = OpenOptions::new()
            .read(true)
            .append(true)
            .open(&self.log_path)?;
        self.index = new_index;
        self.log_len = written;
        self.live_bytes = written - LOG_MAGIC.len() as u64;
        self.dead_bytes = 0;
        self.stats
            .device_bytes_written
            .fetch_add(written, Ordering::Relaxed);
        self.stats.compactions.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Flushes and syncs; an acknowledged synced write survives close and
    /// reopen.
    pub fn close(&mut self) -> Result<(), EngineError> {
        self.log.sync_all()?;
        Ok(())
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let _ = self.log.sync_all();
    }
}
