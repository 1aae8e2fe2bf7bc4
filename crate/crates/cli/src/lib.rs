//! Experiment front-end for the tilesim simulator: config parsing, shipped
//! presets, run orchestration and report emission. The `tilesim` binary is a
//! thin wrapper over this library.

pub mod config;
pub mod presets;
pub mod runner;
