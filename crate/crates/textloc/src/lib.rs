//! File formats, datasets, training runs and the `textloc` command line
//! around `textloc-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod features;
pub mod fewshot;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod trainer;

pub use error::{AppError, AppResult};
