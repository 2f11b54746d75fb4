//! Configuration parsing and command execution for the `epflow` binary.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_str, CommandKind, ConfigError, RunConfig};
pub use run::{run, RunError, RunOptions};
