//! Cycle-level simulator of warp scheduling in a tile-based-rendering GPU
//! core.
//!
//! The model: one tile's warps (one per quad, numbered in scanline order)
//! stream through a core that issues a few instructions per cycle; texture
//! reads go to a small cache hierarchy with finite MSHR tables over a
//! fixed-latency memory. Launch policies reorder the stream — the baseline
//! scanline FIFO against priority-subset schedulers that emulate prefetching
//! by pushing a footprint-covering subset of warps in early without tipping
//! the front cache into an MSHR-full stall.
//!
//! Module map:
//! - [`tile`]: tiles, quads, warps, blocks, access traces
//! - [`workload`]: synthetic trace generation and the trace file format
//! - [`memhier`]: caches, MSHRs, stall semantics, fills
//! - [`sched`]: selection patterns and launch policies
//! - [`coresim`]: the per-cycle core engine and chronograph
//! - [`analytics`]: footprint math and metrics tables

pub mod analytics;
pub mod coresim;
pub mod error;
pub mod memhier;
pub mod sched;
pub mod tile;
pub mod workload;

pub use error::{Error, Result};
