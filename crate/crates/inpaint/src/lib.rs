//! File formats, thread pool, external scorers, evaluation harness and the
//! command-line interface around `inpaint-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod scorer;

pub use error::{Error, Result};
