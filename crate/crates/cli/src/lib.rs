//! Command-line harness: TOML-configured runs, one-axis sweeps, and the
//! vapor budget report, all emitting deterministic CSV/JSON artifacts.

pub mod budget;
pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
pub mod sweep;
