//! Subcommands of the `adabal` binary.

mod error;
pub mod manifest;
pub mod prepare;
pub mod runner;
pub mod selfcheck;
pub mod serve;

pub use error::CliError;
