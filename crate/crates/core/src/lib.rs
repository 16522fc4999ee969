//! Convolutional-feature visual object tracker.
//!
//! A target is represented by a stack of valid-mode filter responses over a
//! normalised `n`x`n` warp of the target region. The filters are normalised
//! patches picked by k-means from the first frame, contrasted against
//! background context filters pooled from regions around the target. The
//! stacked responses are sparsified by soft shrinkage at an adaptive median
//! threshold and tracked with a particle filter over translation and scale.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `std` for
//! `std::error::Error` on [`Error`], and `rayon` to score particles in
//! parallel. File formats and the command-line tool live in the `convtrack`
//! crate.
//!
//! Modules, bottom up:
//! - [`image`]: gray images, boxes, warping, patch extraction and normalisation
//! - [`kmeans`], [`filterbank`]: object and background filter learning
//! - [`fft`], [`featnet`]: simple-cell maps, complex-cell vector, shrinkage
//! - [`tracker`]: particle filter and template update
//! - [`eval`]: overlap, precision and success metrics

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod eval;
pub mod featnet;
pub mod fft;
pub mod filterbank;
pub mod image;
pub mod kmeans;
mod linalg;
pub mod tracker;

pub use error::{Error, Result};
pub use eval::{center_error, overlap_ratio, precision_curve, success_curve, EvalCurve};
pub use featnet::{
    adaptive_lambda, candidate_rep, convolve_valid, convolve_valid_fast, simple_maps, soft_shrink, stack_complex,
    ComplexCellRep, LambdaRule, SimpleCellMap,
};
pub use filterbank::{build_background_filters, sample_background_boxes, select_filters, FilterBank};
pub use image::{extract_patches, normalize_patch, to_gray, warp_region, BoundingBox, GrayImage, Patch, RgbImage};
pub use kmeans::{kmeans_cluster, KMeansResult};
pub use tracker::{
    diffuse_particles, likelihood, update_template, ParticleSet, StepReport, TargetState, TrackerConfig, TrackerState,
    Variant,
};
