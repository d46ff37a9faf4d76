//! Trace-driven analysis of block storage workloads for hybrid (fast/slow
//! tier) storage design.
//!
//! The pipeline reads merged block IO traces ([`trace`]), splits them into
//! per-volume workloads, and offers:
//!
//! * per-workload aggregates and busiest-workload selection ([`stats`]);
//! * request counts per 15-second interval with box-plot summaries
//!   ([`temporal`]);
//! * 4-KiB page cache simulation with LRU and ARC, hit-ratio curves over
//!   cache sizes relative to the footprint, and convergence search
//!   ([`cache`]);
//! * 1-GiB macro-page concentration profiling per slice ([`concentration`]);
//! * a two-tier placement simulator ([`tiering`]);
//! * deterministic synthetic traces with a known hot region ([`synth`]).

pub mod cache;
pub mod cli;
pub mod concentration;
pub mod error;
pub mod stats;
pub mod synth;
pub mod temporal;
pub mod tiering;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{Direction, TraceRecord, TraceSchema, Workload};
