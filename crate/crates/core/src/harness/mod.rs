//! Experiment drivers behind the command-line tool.

pub mod commands;
pub mod config;
pub mod probe;
pub mod report;

pub use commands::{run, Cli, Command};
pub use config::{ExperimentConfig, ReportFormat, PRESETS};
pub use probe::{layer_norms, network_bounds, probe_layer, probe_network, LayerNorms, ProbeReport, PROBE_STREAM};
pub use report::{aggregate, consolidate, merge, read_records, write_records, Aggregate, RunRecord};
