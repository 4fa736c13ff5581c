//! The measurement methodology.
//!
//! Two-phase procedure: first measure the unit — the peak steady WOPS of
//! the workload on a single device, driven by a capable host with external
//! caching defeated ([`measure_unit`] sweeps thread counts) — then measure
//! the platform by replicating the workload across devices under normal
//! caching until no resource allows further gain ([`measure_platform`]).
//! Platform MBWUs `M` is peak steady WOPS divided by the unit; dividing
//! cost, power rating, and volume by `M` gives the efficiency metrics, and
//! [`compare`] turns two efficiency reports into percent savings.

mod executors;
mod measure;
mod reports;
mod steady;

pub use executors::{LiveExecutor, SimExecutor};
pub use measure::{
    measure_platform, measure_unit, DeviceSweepPoint, Executor, MeasureConfig, MeasuredRun,
    PlatformMeasurement, ThreadSweepPoint, UnitMeasurement,
};
pub use reports::{compare, efficiency, EfficiencyReport, MbwuUnit, PlatformResult, SavingsReport};
pub use steady::{detect_steady_state, SteadyParams, SteadySegment};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("series of {have} points is shorter than the {need}-point steady window")]
    InsufficientData { have: usize, need: usize },
    #[error("no steady state found: {0}")]
    NoSteadyState(String),
    #[error("measurement failed: {0}")]
    MeasurementFailed(String),
    #[error("unit was measured for workload {unit_digest} but the spec digest is {spec_digest}")]
    UnitMismatch {
        unit_digest: String,
        spec_digest: String,
    },
    #[error("efficiency is undefined: {0}")]
    UndefinedEfficiency(String),
    #[error("reports are not comparable: {0}")]
    Incomparable(String),
    #[error(transparent)]
    Workload(#[from] crate::workload::WorkloadError),
    #[error(transparent)]
    Sim(#[from] crate::simulator::SimError),
    #[error(transparent)]
    Monitor(#[from] crate::monitor::MonitorError),
    #[error("client: {0}")]
    Client(#[from] crate::kvstore::ClientError),
}
