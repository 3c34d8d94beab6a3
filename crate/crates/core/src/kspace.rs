//! k-space corruption and the end-to-end synthesis pipeline:
//!
//! `x_ulf = | F^-1( U_R C_rho N_sigma F{x~} ) |`
//!
//! Noise is added first, then the bandwidth crop, then undersampling.

use std::ops::Range;

use num_complex::Complex64;
use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bands::{band_energy_fractions, RadialBandSpec};
use crate::error::{invalid, Error, Result};
use crate::fft::{fft3_centered, fft3_real, ifft3_centered};
use crate::physics::{apply_image_space_degradation, ImagePhysicsParams};
use crate::rng::{SeededRng, Stage};
use crate::volume::{center_index, coords, voxel_count, ComplexVolume, Shape, Volume};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two phase-encode axes when `self` is the readout axis.
    pub fn others(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(invalid(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KspaceParams {
    /// Target image-domain SNR; `None` disables the noise stage.
    pub target_snr: Option<f64>,
    /// Retained central fraction of k-space per axis.
    pub rho: f64,
    /// Acceleration factor of the undersampling mask.
    pub r_accel: u32,
    /// Fully sampled central fraction per phase-encode axis.
    pub center_fraction: f64,
    #[serde(default)]
    pub readout_axis: Axis,
}

impl Default for KspaceParams {
    fn default() -> Self {
        Self {
            target_snr: Some(8.0),
            rho: 0.5,
            r_accel: 2,
            center_fraction: 0.25,
            readout_axis: Axis::X,
        }
    }
}

impl KspaceParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(snr) = self.target_snr {
            if !(snr.is_finite() && snr > 0.0) {
                return Err(invalid("target_snr must be positive"));
            }
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho must lie in (0, 1]"));
        }
        if !(self.center_fraction > 0.0 && self.center_fraction < 1.0) {
            return Err(invalid("center_fraction must lie in (0, 1)"));
        }
        if self.r_accel < 1 {
            return Err(invalid("r_accel must be at least 1"));
        }
        Ok(())
    }
}

/// Full parameter record of one synthesis run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    pub image: ImagePhysicsParams,
    pub kspace: KspaceParams,
    pub seed: u64,
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        self.image.validate()?;
        self.kspace.validate()
    }
}

/// Central window of `round(fraction * n)` indices around the DC index `n/2`
/// (at least one index).
pub fn central_window(n: usize, fraction: f64) -> Range<usize> {
    let width = ((fraction * n as f64).round() as usize).clamp(1, n);
    let start = center_index(n) - width / 2;
    start..start + width
}

/// Adds i.i.d. complex Gaussian noise with per-component standard deviation
/// `sqrt(N * signal_power) / target_snr`, which is an image-domain standard
/// deviation of `sqrt(signal_power) / target_snr` after the `1/N` inverse.
pub fn add_kspace_noise(
    k: &ComplexVolume,
    signal_power: f64,
    target_snr: f64,
    rng: &mut SeededRng,
) -> Result<ComplexVolume> {
    if !(target_snr.is_finite() && target_snr > 0.0) {
        return Err(invalid("target_snr must be positive"));
    }
    if !(signal_power.is_finite() && signal_power >= 0.0) {
        return Err(invalid("signal_power must be non-negative"));
    }
    let sigma = noise_sigma(k.len(), signal_power, target_snr);
    let mut out = k.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    for c in out.data_mut() {
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        *c += Complex64::new(re, im);
    }
    Ok(out)
}

pub fn noise_sigma(n: usize, signal_power: f64, target_snr: f64) -> f64 {
    (n as f64 * signal_power).sqrt() / target_snr
}

/// Zeroes everything outside the separable central window of
/// `round(rho * n)` coefficients per axis.
pub fn bandwidth_crop(k: &ComplexVolume, rho: f64) -> Result<ComplexVolume> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("rho {rho} outside (0, 1]")));
    }
    let shape = k.shape();
    let windows = shape.map(|n| central_window(n, rho));
    let mut out = k.clone();
    for (i, c) in out.data_mut().iter_mut().enumerate() {
        let p = coords(shape, i);
        if !(0..3).all(|a| windows[a].contains(&p[a])) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Binary sampling pattern over the phase-encode plane, constant along the
/// readout axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    shape: Shape,
    readout: Axis,
    /// Row-major over `(shape[pe[0]], shape[pe[1]])`, first axis fastest.
    plane: Vec<bool>,
}

impl SamplingMask {
    /// Builds a mask from an explicit plane pattern.
    pub fn from_plane(shape: Shape, readout: Axis, plane: Vec<bool>) -> Result<Self> {
        let [a, b] = readout.others();
        if plane.len() != shape[a] * shape[b] {
            return Err(invalid("mask plane does not match phase-encode dimensions"));
        }
        Ok(Self {
            shape,
            readout,
            plane,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn readout(&self) -> Axis {
        self.readout
    }

    pub fn plane(&self) -> &[bool] {
        &self.plane
    }

    pub fn plane_dims(&self) -> [usize; 2] {
        self.readout.others().map(|a| self.shape[a])
    }

    pub fn achieved_fraction(&self) -> f64 {
        self.plane.iter().filter(|&&b| b).count() as f64 / self.plane.len() as f64
    }

    pub fn retained(&self) -> usize {
        self.plane.iter().filter(|&&b| b).count()
    }

    pub fn sampled_at(&self, u: usize, v: usize) -> bool {
        self.plane[u + self.plane_dims()[0] * v]
    }

    /// Mask broadcast to the full grid.
    pub fn to_grid(&self) -> Vec<bool> {
        let [a, b] = self.readout.others();
        let na = self.shape[a];
        (0..voxel_count(self.shape))
            .map(|i| {
                let p = coords(self.shape, i);
                self.plane[p[a] + na * p[b]]
            })
            .collect()
    }
}

/// Undersampling mask with readout along x.
pub fn make_undersampling_mask(
    shape: Shape,
    r_accel: u32,
    center_fraction: f64,
    rng: &mut SeededRng,
) -> Result<SamplingMask> {
    make_undersampling_mask_along(shape, Axis::X, r_accel, center_fraction, rng)
}

/// Fully samples the central `round(cf * n)` block of the phase-encode plane
/// and fills the remaining budget `round(plane / R)` by uniform selection
/// without replacement from the rest.
pub fn make_undersampling_mask_along(
    shape: Shape,
    readout: Axis,
    r_accel: u32,
    center_fraction: f64,
    rng: &mut SeededRng,
) -> Result<SamplingMask> {
    if r_accel < 1 {
        return Err(invalid("r_accel must be at least 1"));
    }
    if !(center_fraction > 0.0 && center_fraction < 1.0) {
        return Err(invalid("center_fraction must lie in (0, 1)"));
    }
    let [a, b] = readout.others();
    let (na, nb) = (shape[a], shape[b]);
    let total = na * nb;
    if r_accel == 1 {
        return SamplingMask::from_plane(shape, readout, vec![true; total]);
    }
    let (wa, wb) = (
        central_window(na, center_fraction),
        central_window(nb, center_fraction),
    );
    let central = wa.len() * wb.len();
    let budget = (total as f64 / r_accel as f64).round() as usize;
    if central > budget {
        return Err(Error::InfeasibleMask {
            r_accel,
            central,
            budget,
            max_feasible_r: (total / central) as u32,
        });
    }
    let mut plane = vec![false; total];
    let mut outer = Vec::with_capacity(total - central);
    for v in 0..nb {
        for u in 0..na {
            if wa.contains(&u) && wb.contains(&v) {
                plane[u + na * v] = true;
            } else {
                outer.push(u + na * v);
            }
        }
    }
    for pick in index::sample(rng, outer.len(), budget - central) {
        plane[outer[pick]] = true;
    }
    SamplingMask::from_plane(shape, readout, plane)
}

/// Elementwise product of `k` with the broadcast mask.
pub fn apply_mask(k: &ComplexVolume, m: &SamplingMask) -> Result<ComplexVolume> {
    if k.shape() != m.shape() {
        return Err(invalid(format!(
            "mask shape {:?} does not match k-space shape {:?}",
            m.shape(),
            k.shape()
        )));
    }
    let grid = m.to_grid();
    let mut out = k.clone();
    for (c, &keep) in out.data_mut().iter_mut().zip(&grid) {
        if !keep {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Everything realized during one synthesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    /// Parameters with shape-dependent defaults resolved.
    pub params: DegradationParams,
    pub achieved_fraction: f64,
    pub signal_power: f64,
    pub noise_sigma_k: f64,
    /// Low/mid/high energy fractions of the input spectrum.
    pub band_energy_pre: Vec<f64>,
    /// Low/mid/high energy fractions of the output spectrum.
    pub band_energy_post: Vec<f64>,
}

/// Runs the full degradation. Every random draw comes from substreams of
/// `params.seed`, one per stage.
pub fn synthesize_ulf(
    x_hf: &Volume,
    params: &DegradationParams,
) -> Result<(Volume, DegradationReport)> {
    params.validate()?;
    let shape = x_hf.shape();
    let mut b0_rng = SeededRng::for_stage(params.seed, Stage::B0Field);
    let (degraded, fields) = apply_image_space_degradation(x_hf, &params.image, &mut b0_rng)?;

    let spectrum = fft3_centered(&degraded)?;
    let signal_power = degraded.mean_power();
    let (noisy, sigma) = match params.kspace.target_snr {
        Some(snr) => {
            let mut rng = SeededRng::for_stage(params.seed, Stage::KspaceNoise);
            (
                add_kspace_noise(&spectrum, signal_power, snr, &mut rng)?,
                noise_sigma(spectrum.len(), signal_power, snr),
            )
        }
        None => (spectrum, 0.0),
    };
    let cropped = bandwidth_crop(&noisy, params.kspace.rho)?;
    let mut mask_rng = SeededRng::for_stage(params.seed, Stage::Undersampling);
    let mask = make_undersampling_mask_along(
        shape,
        params.kspace.readout_axis,
        params.kspace.r_accel,
        params.kspace.center_fraction,
        &mut mask_rng,
    )?;
    let sampled = apply_mask(&cropped, &mask)?;
    let image = ifft3_centered(&sampled)?;
    let x_ulf = image.magnitude(x_hf.spacing())?.with_affine(*x_hf.affine());

    let bands = RadialBandSpec::default();
    let band_energy_pre = band_energy_fractions(&fft3_real(x_hf)?, &bands)?;
    let band_energy_post = band_energy_fractions(&fft3_real(&x_ulf)?, &bands)?;

    let mut realized = params.clone();
    realized.image.b0_correlation = Some(fields.b0_correlation);
    let report = DegradationReport {
        params: realized,
        achieved_fraction: mask.achieved_fraction(),
        signal_power,
        noise_sigma_k: sigma,
        band_energy_pre,
        band_energy_post,
    };
    Ok((x_ulf, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::spectral_energy;
    use crate::volume::linear_index;

    fn random_k(shape: Shape, seed: u64) -> ComplexVolume {
        let mut rng = SeededRng::new(seed, 99);
        let n = Normal::new(0.0, 1.0).unwrap();
        let data = (0..voxel_count(shape))
            .map(|_| Complex64::new(n.sample(&mut rng), n.sample(&mut rng)))
            .collect();
        ComplexVolume::new(data, shape).unwrap()
    }

    fn energy(k: &ComplexVolume) -> f64 {
        k.data().iter().map(|c| c.norm_sqr()).sum()
    }

    #[test]
    fn window_geometry() {
        assert_eq!(central_window(8, 0.5), 2..6);
        assert_eq!(central_window(8, 1.0), 0..8);
        assert_eq!(central_window(9, 1.0 / 3.0), 3..6);
        assert_eq!(central_window(7, 0.01), 3..4);
        assert_eq!(central_window(64, 0.25), 24..40);
    }

    #[test]
    fn noise_degenerate_cases() {
        let k = random_k([4, 4, 4], 1);
        let mut rng = SeededRng::for_stage(1, Stage::KspaceNoise);
        assert_eq!(add_kspace_noise(&k, 0.0, 5.0, &mut rng).unwrap(), k);
        let out = add_kspace_noise(&k, 1.0, 1e9, &mut rng).unwrap();
        for (a, b) in out.data().iter().zip(k.data()) {
            assert!((a - b).norm() <= 1e-6 * b.norm().max(1.0));
        }
        assert!(add_kspace_noise(&k, 1.0, 0.0, &mut rng).is_err());
        assert!(add_kspace_noise(&k, 1.0, -2.0, &mut rng).is_err());
    }

    #[test]
    fn crop_half_on_8_cubed() {
        let k = ComplexVolume::new(vec![Complex64::new(1.0, 0.0); 512], [8, 8, 8]).unwrap();
        let out = bandwidth_crop(&k, 0.5).unwrap();
        let zeros = out.data().iter().filter(|c| c.norm() == 0.0).count();
        assert_eq!(zeros, 448);
        for x in 2..6 {
            for y in 2..6 {
                for z in 2..6 {
                    assert_eq!(out.get(x, y, z).re, 1.0);
                }
            }
        }
        assert_eq!(bandwidth_crop(&k, 1.0).unwrap(), k);
        assert!(bandwidth_crop(&k, 0.0).is_err());
        assert!(bandwidth_crop(&k, 1.2).is_err());
    }

    #[test]
    fn crop_idempotent_and_contracting() {
        let k = random_k([9, 8, 7], 2);
        let once = bandwidth_crop(&k, 0.47).unwrap();
        assert_eq!(bandwidth_crop(&once, 0.47).unwrap(), once);
        assert!(energy(&once) <= energy(&k));
    }

    #[test]
    fn mask_r1_and_counts() {
        let mut rng = SeededRng::for_stage(4, Stage::Undersampling);
        let m = make_undersampling_mask([8, 8, 8], 1, 0.25, &mut rng).unwrap();
        assert_eq!(m.achieved_fraction(), 1.0);

        let m = make_undersampling_mask([16, 64, 64], 2, 0.25, &mut rng).unwrap();
        assert_eq!(m.retained(), 2048);
        for u in 24..40 {
            for v in 24..40 {
                assert!(m.sampled_at(u, v));
            }
        }
    }

    #[test]
    fn mask_deterministic() {
        let mk = || {
            let mut rng = SeededRng::for_stage(77, Stage::Undersampling);
            make_undersampling_mask([4, 30, 20], 3, 0.2, &mut rng).unwrap()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn mask_infeasible_reports_bound() {
        let mut rng = SeededRng::for_stage(1, Stage::Undersampling);
        // 12x12 central block of a 16x16 plane is 144 points; budget at R=3 is 85.
        match make_undersampling_mask([4, 16, 16], 3, 0.75, &mut rng) {
            Err(Error::InfeasibleMask {
                central,
                budget,
                max_feasible_r,
                ..
            }) => {
                assert_eq!((central, budget, max_feasible_r), (144, 85, 1));
            }
            other => panic!("expected infeasible mask, got {other:?}"),
        }
        // cf = 0.30 keeps a 5x5 block, well inside the R=3 budget.
        assert!(make_undersampling_mask([4, 16, 16], 3, 0.30, &mut rng).is_ok());
    }

    #[test]
    fn mask_application_properties() {
        let k = random_k([4, 6, 5], 3);
        let shape = k.shape();
        let ones = SamplingMask::from_plane(shape, Axis::X, vec![true; 30]).unwrap();
        assert_eq!(apply_mask(&k, &ones).unwrap(), k);
        let zeros = SamplingMask::from_plane(shape, Axis::X, vec![false; 30]).unwrap();
        assert!(apply_mask(&k, &zeros)
            .unwrap()
            .data()
            .iter()
            .all(|c| c.norm() == 0.0));

        let mut rng = SeededRng::for_stage(5, Stage::Undersampling);
        let m = make_undersampling_mask(shape, 2, 0.3, &mut rng).unwrap();
        let once = apply_mask(&k, &m).unwrap();
        assert_eq!(apply_mask(&once, &m).unwrap(), once);
        let restricted = spectral_energy(&k, &m.to_grid()).unwrap();
        assert!((energy(&once) - restricted).abs() < 1e-12);
        assert!(energy(&once) <= energy(&k));

        let wrong = SamplingMask::from_plane([5, 6, 5], Axis::X, vec![true; 30]).unwrap();
        assert!(apply_mask(&k, &wrong).is_err());
    }

    #[test]
    fn mask_constant_along_readout() {
        let mut rng = SeededRng::for_stage(6, Stage::Undersampling);
        let m = make_undersampling_mask_along([10, 6, 12], Axis::Y, 2, 0.25, &mut rng).unwrap();
        let grid = m.to_grid();
        for x in 0..10 {
            for z in 0..12 {
                let first = grid[linear_index([10, 6, 12], x, 0, z)];
                for y in 1..6 {
                    assert_eq!(grid[linear_index([10, 6, 12], x, y, z)], first);
                }
            }
        }
    }

    #[test]
    fn zero_volume_synthesizes_to_zero() {
        let x = Volume::zeros([8, 8, 8], [1.0; 3]).unwrap();
        let (y, report) = synthesize_ulf(&x, &DegradationParams::default()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(report.noise_sigma_k, 0.0);
    }
}
