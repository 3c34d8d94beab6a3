//! Radially binned power spectrum.

use serde::{Deserialize, Serialize};

use crate::bands::{band_energy_fractions, normalized_radius, RadialBandSpec};
use crate::error::{invalid, Result};
use crate::fft::fft3_real;
use crate::volume::Volume;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSpectrum {
    pub n_bins: usize,
    /// Normalized radius at the middle of each bin.
    pub bin_centers: Vec<f64>,
    /// Summed `|F v|^2` of the coefficients in each bin.
    pub power: Vec<f64>,
    /// Number of coefficients in each bin.
    pub counts: Vec<usize>,
}

impl RadialSpectrum {
    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Mean power per coefficient; zero for empty bins.
    pub fn mean_power(&self) -> Vec<f64> {
        self.power
            .iter()
            .zip(&self.counts)
            .map(|(p, &c)| if c == 0 { 0.0 } else { p / c as f64 })
            .collect()
    }

    /// Power per bin divided by the total (all zero for a zero volume).
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        self.power
            .iter()
            .map(|p| if t > 0.0 { p / t } else { 0.0 })
            .collect()
    }
}

/// Equal-width bins over normalized radius `[0, 1]`; the last bin is closed.
pub fn radial_power_spectrum(v: &Volume, n_bins: usize) -> Result<RadialSpectrum> {
    if n_bins == 0 {
        return Err(invalid("need at least one spectrum bin"));
    }
    let k = fft3_real(v)?;
    let radius = normalized_radius(v.shape());
    let mut power = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (c, r) in k.data().iter().zip(&radius) {
        let b = ((r * n_bins as f64) as usize).min(n_bins - 1);
        power[b] += c.norm_sqr();
        counts[b] += 1;
    }
    let bin_centers = (0..n_bins)
        .map(|i| (i as f64 + 0.5) / n_bins as f64)
        .collect();
    Ok(RadialSpectrum {
        n_bins,
        bin_centers,
        power,
        counts,
    })
}

/// Spectrum plus energy fractions in the default low/mid/high bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub spectrum: RadialSpectrum,
    pub band_boundaries: Vec<f64>,
    pub band_fractions: Vec<f64>,
}

pub fn spectrum_report(v: &Volume, n_bins: usize) -> Result<SpectrumReport> {
    let spectrum = radial_power_spectrum(v, n_bins)?;
    let spec = RadialBandSpec::default();
    let band_fractions = band_energy_fractions(&fft3_real(v)?, &spec)?;
    Ok(SpectrumReport {
        spectrum,
        band_boundaries: spec.boundaries,
        band_fractions,
    })
}

/// Result minus reference, per band, plus the L1 distance between the two
/// normalized radial profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub band_deltas: Vec<f64>,
    pub l1_distance: f64,
}

pub fn compare_spectra(
    result: &SpectrumReport,
    reference: &SpectrumReport,
) -> Result<SpectrumComparison> {
    if result.spectrum.n_bins != reference.spectrum.n_bins
        || result.band_fractions.len() != reference.band_fractions.len()
    {
        return Err(invalid(format!(
            "spectra differ in layout: {} vs {} bins",
            result.spectrum.n_bins, reference.spectrum.n_bins
        )));
    }
    let band_deltas = result
        .band_fractions
        .iter()
        .zip(&reference.band_fractions)
        .map(|(a, b)| a - b)
        .collect();
    let l1_distance = result
        .spectrum
        .normalized()
        .iter()
        .zip(reference.spectrum.normalized())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(SpectrumComparison {
        band_deltas,
        l1_distance,
    })
}
