//! Evaluation metrics: image quality, radial power spectra, segmentation
//! overlap and surface distances, and reader-study rank statistics.

pub mod quality;
pub mod ranks;
pub mod seg;
pub mod spectrum;

pub use quality::{ms_ssim, psnr, ssim, MsSsim, SsimParams, MS_SSIM_WEIGHTS};
pub use ranks::{midranks, rank_stats, RankStats};
pub use seg::{assd, dice, hd95, rve, surface_distances};
pub use spectrum::{
    compare_spectra, radial_power_spectrum, spectrum_report, RadialSpectrum, SpectrumComparison,
    SpectrumReport,
};
