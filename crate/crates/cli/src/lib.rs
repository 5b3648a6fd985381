//! Experiment harness for the `snell` command-line tool.

pub mod config;
pub mod harness;
pub mod record;
