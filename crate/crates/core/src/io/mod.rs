//! Config parsing, CSV series, and run manifests.

mod config;
mod manifest;
mod series;

pub use config::{parse_config, parse_plan, plan_to_toml, RunConfig, ScanGrids};
pub use manifest::{gnuplot_script, EngineRecord, Outcome, RunManifest, ARTIFACT_VERSION};
pub use series::{fmt_real, read_series, write_freeze, write_scan, write_series, write_tstar, SERIES_HEADER};
