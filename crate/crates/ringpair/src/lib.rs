//! File formats, scenario loading and the parallel scenario runner around `ringpair-core`.

pub mod config;
pub mod io;
pub mod run;

pub use config::{load_scenario, validate_config, ConfigError, BUNDLED};
pub use run::{run_scenario, RunOptions, Stage, StageError, Summary};
