//! Library side of the `dqg` command-line tool: configuration, report
//! assembly, output formats and the bundled worked-example table.

pub mod commands;
pub mod config;
pub mod golden;
pub mod output;

pub use config::{ApChoice, Format, ProcessKind, RunConfig};
pub use output::{CommandOutput, Table};
