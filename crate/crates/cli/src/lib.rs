//! Configuration parsing and the `run`, `diagnose`, `verify` and `compare`
//! subcommands of the `landau` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_compare, cmd_diagnose, cmd_run, cmd_verify, Outcome};
pub use config::{parse_config, ConfigErrors, InitialData, RunConfig};
