//! Cycle-level simulator of a tiled-chiplet manycore executing a data-local
//! task model with proxy regions and selective cascading, plus the energy,
//! cost, and throughput models needed to study packaging trade-offs.
//!
//! The crate is organized around the moving parts of one simulated system:
//!
//! - [`topology`]: tile/die/package geometry, data ownership, XY routing.
//! - [`noc`]: physical NoCs, routers, flit-level flow control, bubble rule.
//! - [`runtime`]: per-tile task queues, scheduling, abstract-instruction PUs.
//! - [`proxy`]: proxy regions, the write-back merge cache, selective cascading.
//! - [`memory`]: SRAM scratchpad/cache modes, HBM channel model, prefetching.
//! - [`workloads`]: RMAT generation, CSR handling, the six kernels, oracles.
//! - [`models`]: energy ledger, wafer/packaging cost model, TEPS and metrics.
//! - [`sim`]: the deterministic two-phase cycle engine tying it all together.
//! - [`config`] / [`report`]: run configuration and the structured output.

pub mod config;
pub mod error;
pub mod memory;
pub mod models;
pub mod noc;
pub mod proxy;
pub mod report;
pub mod runtime;
pub mod sim;
pub mod topology;
pub mod util;
pub mod value;
pub mod workloads;

pub use config::RunConfig;
pub use error::Error;
pub use sim::Simulator;

/// Simulated core clock. All latency constants are expressed in cycles of
/// this clock (1 cycle = 1 ns).
pub const CLOCK_HZ: f64 = 1.0e9;
