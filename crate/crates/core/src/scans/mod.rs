//! Configuration, single runs, parameter scans and file formats.

pub mod config;
pub mod formats;
pub mod run;

pub use config::{parse_config, RunConfig, ScanSpec, ScanVariable};
pub use run::{run_scan, run_single, ScanReport, SingleRun};
