//! Library behind the `transit-design` binary.

pub mod commands;
pub mod config;
pub mod designer;
pub mod report;

pub use commands::{run, Cli};
