//! Core library for the MBWU measurement framework.
//!
//! An MBWU (media-based work unit) is the peak workload-operations-per-second
//! a given workload reaches on one unit of a specific storage media with
//! external caching defeated. Measuring how many MBWUs a whole platform can
//! sustain, and dividing the platform's cost, power draw, and volume by that
//! number, yields efficiency metrics that are directly comparable across
//! heterogeneous platforms — which is what you need to decide whether a data
//! access function is worth offloading to an embedded platform.
//!
//! The crate is organized around that methodology:
//!
//! - [`workload`] defines workloads as data and generates reproducible
//!   key-value operation streams to drive load and run phases.
//! - [`kvstore`] is the reference key-value engine plus a small daemon and
//!   client speaking a length-prefixed binary protocol, one daemon per
//!   storage device.
//! - [`simulator`] is an analytic model of a platform running N replicated
//!   workload/device pairs, used both for desk-scale experiments and as a
//!   ground-truth backend for tests.
//! - [`monitor`] samples resource utilization during runs and infers the
//!   binding resource.
//! - [`mbwu`] implements the measurement methodology itself: steady-state
//!   detection, the thread and device sweeps, and the efficiency and
//!   savings reports.

pub mod digest;
pub mod kvstore;
pub mod mbwu;
pub mod monitor;
pub mod simulator;
pub mod workload;

pub use simulator::Resource;
