//! File formats, experiment runner and command-line interface on top of
//! `ltfuse-core`.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod runner;

pub use error::{Error, Result};
