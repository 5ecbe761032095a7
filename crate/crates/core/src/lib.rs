//! Total-variation denoising with noise-specific maximum-likelihood data
//! terms, aimed at log-compressed ultrasound speckle.
//!
//! The crate provides:
//!
//! * [`image`]: the dense scalar field type and its stencils.
//! * [`noise`]: generalized-gamma speckle, log-compression and data terms.
//! * [`solvers`]: the MLD fixed-point solver, TV-L1 and Gaussian MLD (ROF).
//! * [`phantom`]: an analytic vessel phantom in cartesian and polar form.
//! * [`metrics`]: bias, dispersion, edge correlation and low-pass Pearson.
//! * [`sweep`]: brute-force parameter grids with CSV reports.
//!
//! With the default `parallel` feature the per-pixel loops and the sweep run
//! on rayon; without it everything runs sequentially with identical results.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod image;
pub mod io;
pub mod kv;
pub mod manifest;
pub mod metrics;
pub mod noise;
pub mod par;
pub mod phantom;
pub mod scan;
pub mod solvers;
pub mod sweep;

pub use error::{Error, Result};
pub use image::{HalfPixelGradients, Image};
pub use noise::{GGParams, GaussianParams, Seed};
pub use solvers::{DenoiseResult, Method, SolverConfig};
