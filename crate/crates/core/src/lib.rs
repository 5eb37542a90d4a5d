//! Perfusion quantification for dynamic susceptibility contrast MRI.
//!
//! The crate estimates the four clinical perfusion parameters (CBV, CBF,
//! MTT, Tmax) from a 4-D signal time series along two independent routes:
//!
//! * [`deconv`] — the classical baseline: truncated-SVD deconvolution of the
//!   tissue concentration curve with the arterial input function, in both
//!   standard (Toeplitz) and delay-insensitive block-circulant form.
//! * [`stnet`] — a spatiotemporal convolutional network regressing CBV, CBF
//!   and Tmax per voxel from 7x7x50 signal patches, trained with a combined
//!   MAE + physical-consistency loss and manual backpropagation.
//!
//! [`tracer_kinetics`] holds the indicator-dilution math shared by both
//! routes, [`phantom`] synthesizes volumes with exactly known ground truth,
//! and [`metrics`] scores maps and hypo-perfusion segmentations.
//!
//! All numeric code is generic over the scalar type through [`Scalar`];
//! `f64` (aliased as [`Real`]) is the working precision of the toolkit and
//! the only type the command-line pipeline uses.

pub mod deconv;
pub mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod scalar;
pub mod series;
pub mod stnet;
pub mod tracer_kinetics;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default working precision of the toolkit.
pub type Real = f64;

/// Concrete aliases for the default precision.
pub type Volume4D64 = volume::Volume4D<Real>;
pub type TimeSeries64 = series::TimeSeries<Real>;
pub type ParameterMaps64 = volume::ParameterMaps<Real>;
