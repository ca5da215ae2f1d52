//! File formats, dataset preparation, checkpoints, the odd/even
//! evaluation protocol and the `stvu` command-line tool. Everything
//! numeric lives in `stvu-core`; this crate owns the std-only surface.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod evalproto;
pub mod flowio;
pub mod heatmap;
pub mod losslog;
pub mod pngio;

pub use error::CliError;
pub mod commands;
