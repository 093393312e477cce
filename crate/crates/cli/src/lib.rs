//! Command-line front end: feasibility reports, certificate construction and
//! checking, the ternary solver, and exhaustive scans of small n.

pub mod commands;
pub mod config;
pub mod scan;

pub use commands::{run, Cli, Command};
