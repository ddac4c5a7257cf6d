//! Command-line front end: CSV/TOML/JSON plumbing and task dispatch.

pub mod args;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Task};
pub use error::CliError;
pub use report::Report;
pub use run::{configure_threads, run, run_and_write};
