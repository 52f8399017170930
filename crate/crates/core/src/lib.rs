//! Weakly supervised root segmentation for minirhizotron imagery.
//!
//! Images carry only a bag label ("contains roots" / "root free"), yet the
//! output is a per-pixel root confidence map. The pipeline stages are:
//!
//! 1. [`raster`] – column destriping and sRGB → CIELAB conversion.
//! 2. [`superpixels`] – SLIC oversegmentation.
//! 3. [`features`] – the 18-dimensional per-superpixel descriptor and its
//!    per-image order-of-magnitude scaling.
//! 4. [`bags`] – bag construction at image, small-bag and instance granularity,
//!    plus green-histogram downsampling of image bags.
//! 5. [`mil`] – MI-ACE, miSVM and MIForests on top of the supervised
//!    [`learners`] (SMO kernel SVM, Gini random forest).
//! 6. [`postproc`] – thresholding and connected-component filtering.
//! 7. [`eval`] – pixel ROC curves, TPR at fixed FPR, F-score, run aggregation.
//!
//! [`synth`] generates seeded minirhizotron-like images with exact ground
//! truth, and [`experiment`] wires everything into reproducible multi-run
//! experiments.
//!
//! Data-parallel loops go through [`exec::Parallelism`]; building without the
//! default `parallel` feature runs every loop sequentially with identical
//! results.

pub mod bags;
pub mod cmap;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod features;
pub mod learners;
pub mod mil;
pub mod pipeline;
pub mod postproc;
pub mod raster;
pub mod seed;
pub mod superpixels;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Parallelism;
