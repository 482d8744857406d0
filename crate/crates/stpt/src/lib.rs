//! File formats, configuration files and the command line around `stpt-core`.

pub mod cli;
pub mod io;
pub mod settings;

pub use io::{Error, Result};
