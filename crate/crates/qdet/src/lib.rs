//! File formats, the algorithm catalog and the `qdet` command line, on top of `qdet-core`.

pub mod catalog;
pub mod cli;
pub mod formats;

pub use qdet_core as core;
