//! Std companion of `music-core`: IDX and CSV/JSON formats, the synthetic
//! and MNIST experiments, and the `music` command-line tool.

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod idx;

pub use error::{LabError, Result};

/// Environment variable naming the directory that holds the MNIST IDX files.
pub const DATA_DIR_ENV: &str = "MUSIC_DATA_DIR";
