//! Synthesis of ultra-low-field MRI volumes from high-field scans, with the
//! spatial-frequency training losses and evaluation metrics that go with it.
//!
//! The layers build on each other:
//!
//! * [`volume`], [`fft`], [`bands`], [`rng`]: grids, centered 3D transforms,
//!   radial band geometry and deterministic random streams.
//! * [`nifti`]: NIfTI-1 reading and writing.
//! * [`physics`]: image-space degradation (coil sensitivity, B0 field, T2*
//!   decay, dephasing).
//! * [`kspace`]: k-space noise, bandwidth crop, undersampling and the
//!   end-to-end [`kspace::synthesize_ulf`] pipeline.
//! * [`sampling`]: per-volume parameter draws.
//! * [`losses`]: voxel L1, band-weighted log-spectrum and gradient losses with
//!   analytic gradients.
//! * [`metrics`]: PSNR, SSIM, MS-SSIM, radial spectra, segmentation metrics and
//!   reader-study rank statistics.
//! * [`slice`]: 2D slice extraction and display windowing.
//! * [`dataset`]: batch corpus generation, manifests, splitting and evaluation.

pub mod bands;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod kspace;
pub mod losses;
pub mod metrics;
pub mod nifti;
pub mod physics;
pub mod rng;
pub mod sampling;
pub mod slice;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{ComplexVolume, ScalarField, SegMask, Shape, Spacing, Volume};
