//! Command-line driver for `fdmask`: the `FVT1` tensor container, text
//! formats for configs, manifests, index lists and metrics, and the
//! `gen`, `mask`, `sample`, `gradcheck`, `train` and `eval` commands.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod text;

pub use error::{CliError, CliResult, ExitKind};
