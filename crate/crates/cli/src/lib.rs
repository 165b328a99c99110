//! File formats and command implementations behind the `ae1svm` binary.
//!
//! | module | contents |
//! |---|---|
//! | [`dataset`] | CSV ingestion with one-hot categorical columns and label mapping |
//! | [`model_file`] | versioned JSON model container |
//! | [`config`] | flat TOML run configuration |
//! | [`commands`] | `generate`, `train`, `score`, `explain`, `eval` |
//! | [`pgm`] | greyscale gradient-map images |

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod model_file;
pub mod pgm;

pub use error::{CliError, Result};
