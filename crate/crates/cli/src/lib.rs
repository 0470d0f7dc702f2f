//! Experiment harness for CVT-MAP-Elites: configuration handling and the
//! subcommands behind the `cvt-elites` binary.

pub mod commands;
pub mod config;
