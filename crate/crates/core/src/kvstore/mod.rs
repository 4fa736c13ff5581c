//! Reference key-value engine, daemon, and client.
//!
//! The engine is a single-file append log with an in-memory index and
//! threshold-triggered compaction — deliberately simple, but it exposes the
//! byte counters needed to observe write amplification. The daemon binds
//! one engine to one device path and serves OPEN/CLOSE/GET/PUT/DELETE/STATUS
//! over a length-prefixed binary protocol; the client is a blocking
//! per-connection counterpart that also implements
//! [`crate::workload::KvEndpoint`].

mod client;
mod daemon;
mod engine;
mod wire;

pub use client::{ClientError, KvClient};
pub use daemon::{serve, spawn, DaemonHandle};
pub use engine::{Engine, EngineError, EngineStats, StoreOptions, StoreStats};
pub use wire::{
    read_frame, write_frame, Frame, Opcode, ProtocolError, Status, ERROR_CODE_CORRUPT,
    ERROR_CODE_INTERNAL, ERROR_CODE_IO, ERROR_CODE_NOT_OPEN, MAX_FRAME_LEN,
};
