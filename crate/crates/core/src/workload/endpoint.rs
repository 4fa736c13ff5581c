//! The key-value endpoint a workload runs against.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("remote error {code}: {message}")]
    Remote { code: u32, message: String },
    #[error("{0}")]
    Other(String),
}

/// Blocking key-value operations. Each worker owns one endpoint; endpoints
/// that share backing state must synchronize internally.
pub trait KvEndpoint {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<(), EndpointError>;
    fn get(&mut self, key: &[u8]) -> Result<Option<Vec<u8>>, EndpointError>;
    /// Returns whether the key existed.
    fn delete(&mut self, key: &[u8]) -> Result<bool, EndpointError>;
}

/// Paces operations onto a fixed service schedule: operation `i` completes
/// no earlier than `i / rate` seconds after the epoch. A stalled consumer
/// catches up instead of losing budget, so completed operations stay
/// proportional to elapsed time.
struct Pacer {
    rate: f64,
    next_slot: AtomicU64,
}

/// Shared state behind [`InMemoryEndpoint`]: a hash map plus an optional
/// pacer that models a device with a constant service rate.
pub struct InMemoryStore {
    map: Mutex<HashMap<Vec<u8>, Vec<u8>>>,
    pacer: Option<Pacer>,
    epoch: Instant,
}

impl InMemoryStore {
    pub fn unlimited() -> Arc<Self> {
        Arc::new(InMemoryStore {
            map: Mutex::new(HashMap::new()),
            pacer: None,
            epoch: Instant::now(),
        })
    }

    /// Store that serves `ops_per_sec` operations per second, spread
    /// evenly.
    pub fn with_service_rate(ops_per_sec: f64) -> Arc<Self> {
        assert!(ops_per_sec > 0.0);
        Arc::new(InMemoryStore {
            map: Mutex::new(HashMap::new()),
            pacer: Some(Pacer {
                rate: ops_per_sec,
                next_slot: AtomicU64::new(0),
            }),
            epoch: Instant::now(),
        })
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> Vec<Vec<u8>> {
        self.map.lock().unwrap().keys().cloned().collect()
    }

    fn admit(&self) {
        if let Some(pacer) = &self.pacer {
            let slot = pacer.next_slot.fetch_add(1, Ordering::Relaxed);
            let target = slot as f64 / pacer.rate;
            loop {
                let wait = target - self.epoch.elapsed().as_secs_f64();
                if wait <= 0.0 {
                    return;
                }
                // Timer sleeps are far coarser than sub-millisecond slot
                // gaps, so short waits spin on yield.
                if wait > 0.002 {
                    std::thread::sleep(std::time::Duration::from_secs_f64(wait.min(0.01)));
                } else {
                    std::thread::yield_now();
                }
            }
        }
    }
}

/// In-memory endpoint for tests and dry runs. Cloning yields another
/// connection to the same store.
#[derive(Clone)]
pub struct InMemoryEndpoint {
    store: Arc<InMemoryStore>,
}

impl InMemoryEndpoint {
    pub fn new(store: Arc<InMemoryStore>) -> Self {
        InMemoryEndpoint { store }
    }

    pub fn store(&self) -> &Arc<InMemoryStore> {
        &self.store
    }
}

impl KvEndpoint for InMemoryEndpoint {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<(), EndpointError> {
        self.store.admit();
        self.store
            .map
            .lock()
            .unwrap()
            .insert(key.to_vec(), value.to_vec());
        Ok(())
    }

    fn get(&mut self, key: &[u8]) -> Result<Option<Vec<u8>>, EndpointError> {
        self.store.admit();
        Ok(self.store.map.lock().unwrap().get(key).cloned())
    }

    fn delete(&mut self, key: &[u8]) -> Result<bool, EndpointError> {
        self.store.admit();
        Ok(self.store.map.lock().unwrap().remove(key).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_your_writes() {
        let mut ep = InMemoryEndpoint::new(InMemoryStore::unlimited());
        ep.put(b"k", b"v").unwrap();
        assert_eq!(ep.get(b"k").unwrap(), Some(b"v".to_vec()));
        assert!(ep.delete(b"k").unwrap());
        assert_eq!(ep.get(b"k").unwrap(), None);
        assert!(!ep.delete(b"k").unwrap());
    }

    #[test]
    fn service_rate_bounds_throughput() {
        let store = InMemoryStore::with_service_rate(2000.0);
        let mut ep = InMemoryEndpoint::new(store);
        let start = Instant::now();
        for i in 0u32..500 {
            ep.put(&i.to_le_bytes(), b"x").unwrap();
        }
        let elapsed = start.elapsed().as_secs_f64();
        assert!(elapsed >= 0.24, "500 ops at 2000/s took only {elapsed}s");
    }
}
