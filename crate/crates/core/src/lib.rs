//! Automated algae identification from multi-band fluorescence microscopy.
//!
//! The pipeline runs in five stages, each exposed as a module:
//!
//! 1. [`stack_io`]: the multi-band image cube and its on-disk format.
//! 2. [`illumination`]: background estimation and subtraction.
//! 3. [`segmentation`]: Otsu thresholding, mask fusion and connected components.
//! 4. [`features`]: morphological and spectral descriptors per organism.
//! 5. [`classifier`] and [`evaluation`]: a small feedforward network and the
//!    Monte Carlo cross-validation harness used to compare feature sets.
//!
//! [`synthgen`] renders labelled synthetic scenes so the whole chain can be
//! exercised without access to real specimen images, and [`pipeline`] wires
//! the stages together for the `algaeid` command line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod illumination;
pub mod pipeline;
pub mod raster;
pub mod segmentation;
pub mod stack_io;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use raster::Raster;
pub use stack_io::{ImageStack, RoleTag};
