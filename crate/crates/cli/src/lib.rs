//! IO, plotting, and command plumbing for the `noisydet` binary.

pub mod boot;
pub mod commands;
pub mod error;
pub mod io;
pub mod svg;

pub use error::{CliError, Result};
