//! File formats, command-line interface and benchmarks on top of `trienc-core`.

pub mod bench;
pub mod cli;
pub mod corpus_io;
pub mod error;
pub mod report;
pub mod store_io;
pub mod verify;

pub use error::{IoError, Result};
