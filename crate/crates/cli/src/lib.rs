//! Library half of the `bqdc` binary: configuration, reports, table
//! rendering and the subcommands.

pub mod commands;
pub mod config;
pub mod report;
pub mod tables;
