//! Workload definition and generation.
//!
//! A [`WorkloadSpec`] describes a key-value workload as data: key/value
//! sizes, read fraction, key popularity distribution, dataset size, and a
//! seed. From a spec this module produces bitwise-reproducible operation
//! streams and drives them against any [`KvEndpoint`]: a load phase that
//! fills the store (optionally rate limited) and a run phase where N
//! worker threads issue operations from disjoint seeded streams.

mod endpoint;
mod keygen;
mod rate;
mod runner;
mod spec;
mod stream;

pub use endpoint::{EndpointError, InMemoryEndpoint, InMemoryStore, KvEndpoint};
pub use keygen::{splitmix64, IndexPermutation, KeyGenerator};
pub use rate::TokenBucket;
pub use runner::{
    load_phase, run_phase, ConnectFn, LatencyPercentiles, LoadReport, RunConfig, RunReport,
    WorkerStatus,
};
pub use spec::{KeyDistribution, WorkloadSpec, DEFAULT_ZIPF_THETA};
pub use stream::{OpKind, OpStream, WorkloadOp};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("load aborted after {loaded} of {total} records: {source}")]
    AbortedLoad {
        loaded: u64,
        total: u64,
        #[source]
        source: EndpointError,
    },
    #[error("run completed partially; {failed} of {total} workers failed")]
    PartialRun {
        failed: usize,
        total: usize,
        statuses: Vec<WorkerStatus>,
    },
    #[error("endpoint error: {0}")]
    Endpoint(#[from] EndpointError),
}
