//! Command-line driver for srcstab: binary sweep/trace/volume files, report emission and the subcommands.

pub mod commands;
pub mod container;
pub mod report;

pub use commands::{run, Cli, Command, Status};
