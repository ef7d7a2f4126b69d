//! Document text localization: Gaussian target maps, the map-predicting
//! generator/discriminator pair, the composite training objective, map
//! post-processing and detection scoring.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. File formats, the command line and on-disk caches live in the
//! `textloc` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod imaging;
pub mod maps;
pub mod nn;
pub mod train;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use eval::{evaluate, iou, EvalReport, MatchParams};
pub use geometry::{AffineMap, Point, QuadBox, Rect};
pub use imaging::{ContentRegion, Image, PostprocessParams};
pub use maps::{gaussian_patch, render_map, Composition, GaussianPatchSpec, Grid, HeatMap};
