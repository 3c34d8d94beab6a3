//! Image-space degradation: receive-coil sensitivity, a smooth random B0
//! field, T2* decay driven by the B0 gradient, and B0-induced dephasing.
//!
//! `x~(r) = s(r) * x_hf(r) * exp(-TE / T2*(r)) * exp(j phi(r))`
//! with `1/T2*(r) = 1/T2 + k * |grad B0(r)|`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fft::{fft3_centered, ifft3_centered};
use crate::rng::SeededRng;
use crate::volume::{
    center_index, check_same_shape, check_shape, coords, linear_index, voxel_count, ComplexVolume,
    ScalarField, Shape, Spacing, Volume,
};

/// Sensitivity at the boundary of the coil ellipsoid.
pub const COIL_FLOOR: f64 = 0.3;

pub const DEFAULT_GRAD_COUPLING: f64 = 2000.0;
pub const DEFAULT_PHASE_SCALE: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagePhysicsParams {
    /// Intrinsic tissue T2, seconds.
    pub t2: f64,
    /// Echo time, seconds.
    pub te: f64,
    /// Peak absolute B0 deviation (dimensionless).
    pub b0_strength: f64,
    /// Gaussian smoothing scale of the B0 field in voxels; `None` selects
    /// `ceil(min(shape) / 8)`.
    #[serde(default)]
    pub b0_correlation: Option<f64>,
    /// Coupling `k` between `|grad B0|` (per mm) and the relaxation rate (1/s).
    #[serde(default = "default_grad_coupling")]
    pub grad_coupling: f64,
    /// Radians accrued per unit B0 per cycle of TE.
    #[serde(default = "default_phase_scale")]
    pub phase_scale: f64,
    /// When false the coil map is identically 1.
    #[serde(default = "default_true")]
    pub coil_sensitivity: bool,
}

fn default_grad_coupling() -> f64 {
    DEFAULT_GRAD_COUPLING
}

fn default_phase_scale() -> f64 {
    DEFAULT_PHASE_SCALE
}

fn default_true() -> bool {
    true
}

impl Default for ImagePhysicsParams {
    fn default() -> Self {
        Self {
            t2: 0.08,
            te: 0.115,
            b0_strength: 0.035,
            b0_correlation: None,
            grad_coupling: DEFAULT_GRAD_COUPLING,
            phase_scale: DEFAULT_PHASE_SCALE,
            coil_sensitivity: true,
        }
    }
}

impl ImagePhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t2.is_finite() && self.t2 > 0.0) {
            return Err(invalid("t2 must be positive"));
        }
        if !(self.te.is_finite() && self.te > 0.0) {
            return Err(invalid("te must be positive"));
        }
        if !(self.b0_strength.is_finite() && self.b0_strength >= 0.0) {
            return Err(invalid("b0_strength must be non-negative"));
        }
        if let Some(c) = self.b0_correlation {
            if !(c.is_finite() && c >= 1.0) {
                return Err(invalid("b0_correlation must be at least one voxel"));
            }
        }
        if !(self.grad_coupling.is_finite() && self.grad_coupling >= 0.0) {
            return Err(invalid("grad_coupling must be non-negative"));
        }
        if !self.phase_scale.is_finite() {
            return Err(invalid("phase_scale must be finite"));
        }
        Ok(())
    }

    pub fn correlation_for(&self, shape: Shape) -> f64 {
        self.b0_correlation
            .unwrap_or_else(|| default_b0_correlation(shape))
    }
}

/// `ceil(min(shape) / 8)` voxels, at least 1.
pub fn default_b0_correlation(shape: Shape) -> f64 {
    let m = *shape.iter().min().unwrap_or(&1);
    (m as f64 / 8.0).ceil().max(1.0)
}

/// `s(r) = 1 - 0.7 * rho_e(r)^2`, where `rho_e` is the ellipsoidal radius with
/// semi-axes equal to half the physical extent `(n - 1) * spacing / 2`,
/// clamped to `[0, 1]`.
pub fn coil_sensitivity_map(shape: Shape, spacing: Spacing) -> Result<ScalarField> {
    check_shape(shape)?;
    if shape.iter().any(|&n| n < 2) {
        return Err(invalid(format!(
            "coil map needs every dimension >= 2, got {shape:?}"
        )));
    }
    let centre = shape.map(|n| (n as f64 - 1.0) / 2.0);
    let semi = [0, 1, 2].map(|a| centre[a] * spacing[a]);
    let data = (0..voxel_count(shape))
        .map(|i| {
            let c = coords(shape, i);
            let rho2: f64 = (0..3)
                .map(|a| {
                    let u = (c[a] as f64 - centre[a]) * spacing[a] / semi[a];
                    u * u
                })
                .sum();
            1.0 - (1.0 - COIL_FLOOR) * rho2.min(1.0)
        })
        .collect();
    ScalarField::new(data, shape)
}

/// Smooth random field: white Gaussian noise low-pass filtered by an isotropic
/// Gaussian kernel of standard deviation `correlation` voxels (applied as the
/// transfer function `exp(-2 pi^2 sigma^2 |f|^2)`), mean-centred and scaled so
/// that `max |B0| = strength`.
pub fn b0_field(
    shape: Shape,
    strength: f64,
    correlation: f64,
    rng: &mut SeededRng,
) -> Result<ScalarField> {
    check_shape(shape)?;
    if !(strength.is_finite() && strength >= 0.0) {
        return Err(invalid("B0 strength must be non-negative"));
    }
    if !(correlation.is_finite() && correlation > 0.0) {
        return Err(invalid("B0 correlation must be positive"));
    }
    let n = voxel_count(shape);
    if strength == 0.0 {
        return ScalarField::constant(shape, 0.0);
    }
    let noise: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut spectrum = fft3_centered(&ComplexVolume::new(noise, shape)?)?;
    let centres = shape.map(center_index);
    let two_pi2_s2 = 2.0 * PI * PI * correlation * correlation;
    for (i, c) in spectrum.data_mut().iter_mut().enumerate() {
        let k = coords(shape, i);
        let f2: f64 = (0..3)
            .map(|a| {
                let f = (k[a] as f64 - centres[a] as f64) / shape[a] as f64;
                f * f
            })
            .sum();
        *c *= (-two_pi2_s2 * f2).exp();
    }
    let smooth = ifft3_centered(&spectrum)?;
    let mean = smooth.data().iter().map(|c| c.re).sum::<f64>() / n as f64;
    let mut data: Vec<f64> = smooth.data().iter().map(|c| c.re - mean).collect();
    let peak = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return ScalarField::constant(shape, 0.0);
    }
    let scale = strength / peak;
    data.iter_mut().for_each(|v| *v *= scale);
    ScalarField::new(data, shape)
}

/// Per-voxel `|grad f|` in field units per mm: central differences inside,
/// one-sided at the faces, zero along singleton axes.
pub fn gradient_magnitude(field: &ScalarField, spacing: Spacing) -> Vec<f64> {
    let shape = field.shape;
    let mut out = vec![0.0; voxel_count(shape)];
    for (i, g) in out.iter_mut().enumerate() {
        let c = coords(shape, i);
        let mut sq = 0.0;
        for a in 0..3 {
            let n = shape[a];
            if n < 2 {
                continue;
            }
            let at = |j: usize| {
                let mut p = c;
                p[a] = j;
                field.data[linear_index(shape, p[0], p[1], p[2])]
            };
            let d = if c[a] == 0 {
                at(1) - at(0)
            } else if c[a] == n - 1 {
                at(n - 1) - at(n - 2)
            } else {
                (at(c[a] + 1) - at(c[a] - 1)) / 2.0
            } / spacing[a];
            sq += d * d;
        }
        *g = sq.sqrt();
    }
    out
}

/// `T2*(r) = 1 / (1/T2 + k |grad B0(r)|)`, always in `(0, T2]`.
pub fn t2_star_map(b0: &ScalarField, spacing: Spacing, t2: f64, k: f64) -> Result<ScalarField> {
    if !(t2.is_finite() && t2 > 0.0) {
        return Err(invalid("t2 must be positive"));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(invalid("gradient coupling must be non-negative"));
    }
    let grad = gradient_magnitude(b0, spacing);
    let rate0 = 1.0 / t2;
    let data = grad.iter().map(|&g| 1.0 / (rate0 + k * g)).collect();
    ScalarField::new(data, b0.shape)
}

/// `phi(r) = phase_scale * 2 pi * B0(r) * TE`.
pub fn dephasing_field(b0: &ScalarField, te: f64, phase_scale: f64) -> Result<ScalarField> {
    if !(te.is_finite() && te > 0.0) {
        return Err(invalid("te must be positive"));
    }
    let data = b0
        .data
        .iter()
        .map(|&b| phase_scale * 2.0 * PI * b * te)
        .collect();
    ScalarField::new(data, b0.shape)
}

/// Realized intermediate fields of one image-space degradation.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSpaceFields {
    pub coil: ScalarField,
    pub b0: ScalarField,
    pub t2_star: ScalarField,
    pub phase: ScalarField,
    pub b0_correlation: f64,
}

/// Composes the coil map, B0 field, T2* decay and phase into `x~`. The B0
/// field draws from `rng`.
pub fn apply_image_space_degradation(
    x_hf: &Volume,
    p: &ImagePhysicsParams,
    rng: &mut SeededRng,
) -> Result<(ComplexVolume, ImageSpaceFields)> {
    p.validate()?;
    if x_hf.data().iter().any(|&v| v < 0.0) {
        return Err(invalid("high-field volume must be non-negative"));
    }
    let shape = x_hf.shape();
    let spacing = x_hf.spacing();
    let coil = if p.coil_sensitivity {
        coil_sensitivity_map(shape, spacing)?
    } else {
        ScalarField::constant(shape, 1.0)?
    };
    let correlation = p.correlation_for(shape);
    let b0 = b0_field(shape, p.b0_strength, correlation, rng)?;
    let t2_star = t2_star_map(&b0, spacing, p.t2, p.grad_coupling)?;
    let phase = dephasing_field(&b0, p.te, p.phase_scale)?;
    for f in [&coil, &b0, &t2_star, &phase] {
        check_same_shape(f.shape, shape)?;
    }
    let data = (0..voxel_count(shape))
        .map(|i| {
            let amplitude = coil.data[i] * x_hf.data()[i] * (-p.te / t2_star.data[i]).exp();
            Complex64::from_polar(amplitude, phase.data[i])
        })
        .collect();
    let degraded = ComplexVolume::new(data, shape)?;
    Ok((
        degraded,
        ImageSpaceFields {
            coil,
            b0,
            t2_star,
            phase,
            b0_correlation: correlation,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::{band_energy_fractions, RadialBandSpec};
    use crate::rng::Stage;

    #[test]
    fn coil_centre_and_face() {
        let s = coil_sensitivity_map([9, 9, 9], [1.0; 3]).unwrap();
        assert_eq!(s.get(4, 4, 4), 1.0);
        assert!((s.get(0, 4, 4) - 0.3).abs() < 1e-12);
        assert!((s.get(5, 4, 4) - 0.95625).abs() < 1e-12);
        assert!((s.get(4, 4, 8) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn coil_anisotropic_spacing_uses_physical_semi_axes() {
        // Semi-axes scale with spacing, so the normalized radius only depends on
        // the fractional position along each axis.
        let a = coil_sensitivity_map([9, 9, 9], [1.0, 2.0, 3.0]).unwrap();
        let b = coil_sensitivity_map([9, 9, 9], [1.0; 3]).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn coil_rejects_degenerate_shape() {
        assert!(coil_sensitivity_map([1, 4, 4], [1.0; 3]).is_err());
    }

    #[test]
    fn coil_monotone_along_axes() {
        let shape = [12, 9, 7];
        let s = coil_sensitivity_map(shape, [1.0; 3]).unwrap();
        for x in 6..11 {
            assert!(s.get(x + 1, 4, 3) <= s.get(x, 4, 3));
        }
        for x in 1..6 {
            assert!(s.get(x - 1, 4, 3) <= s.get(x, 4, 3));
        }
    }

    #[test]
    fn b0_zero_strength_and_peak() {
        let mut rng = SeededRng::for_stage(3, Stage::B0Field);
        let z = b0_field([8, 8, 8], 0.0, 2.0, &mut rng).unwrap();
        assert!(z.data.iter().all(|&v| v == 0.0));
        for seed in 0..5 {
            let mut rng = SeededRng::for_stage(seed, Stage::B0Field);
            let f = b0_field([10, 12, 8], 0.037, 2.0, &mut rng).unwrap();
            assert!((f.max_abs() - 0.037).abs() < 1e-12);
        }
    }

    #[test]
    fn b0_smoother_with_larger_correlation() {
        let spec = RadialBandSpec::default();
        let high = |corr: f64| {
            let mut rng = SeededRng::for_stage(11, Stage::B0Field);
            let f = b0_field([64, 64, 64], 0.05, corr, &mut rng).unwrap();
            let k =
                crate::fft::fft3_real(&Volume::new(f.data, [64; 3], [1.0; 3]).unwrap()).unwrap();
            band_energy_fractions(&k, &spec).unwrap()[2]
        };
        assert!(high(8.0) < high(2.0));
    }

    #[test]
    fn t2_star_cases() {
        let shape = [6, 5, 4];
        let uniform = ScalarField::constant(shape, 0.3).unwrap();
        let t = t2_star_map(&uniform, [1.0; 3], 0.08, 50.0).unwrap();
        assert!(t.data.iter().all(|&v| v == 0.08));

        let ramp = ScalarField::new(
            (0..voxel_count(shape))
                .map(|i| 0.01 * coords(shape, i)[0] as f64)
                .collect(),
            shape,
        )
        .unwrap();
        let t = t2_star_map(&ramp, [1.0; 3], 0.08, 0.0).unwrap();
        assert!(t.data.iter().all(|&v| v == 0.08));

        let k = 40.0;
        let t = t2_star_map(&ramp, [1.0; 3], 0.08, k).unwrap();
        for x in 0..6 {
            let rate = 1.0 / t.get(x, 2, 2);
            assert!((rate - (1.0 / 0.08 + k * 0.01)).abs() < 1e-9, "x={x}");
        }
        assert!(t2_star_map(&ramp, [1.0; 3], 0.0, k).is_err());
    }

    #[test]
    fn gradient_respects_spacing() {
        let shape = [5, 3, 3];
        let ramp = ScalarField::new(
            (0..voxel_count(shape))
                .map(|i| coords(shape, i)[0] as f64)
                .collect(),
            shape,
        )
        .unwrap();
        let g = gradient_magnitude(&ramp, [2.0, 1.0, 1.0]);
        assert!(g.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn phase_cases() {
        let b0 = ScalarField::constant([2, 2, 2], 0.05).unwrap();
        let phi = dephasing_field(&b0, 0.1, 1.0).unwrap();
        assert!((phi.data[0] - 2.0 * PI * 0.005).abs() < 1e-15);
        assert!((phi.data[0] - 0.0314159).abs() < 1e-6);
        let phi2 = dephasing_field(&b0, 0.2, 1.0).unwrap();
        assert!((phi2.data[3] - 2.0 * phi.data[3]).abs() < 1e-15);
        let zero =
            dephasing_field(&ScalarField::constant([2, 2, 2], 0.0).unwrap(), 0.1, 1.0).unwrap();
        assert!(zero.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let x = Volume::zeros([8, 8, 8], [1.0; 3]).unwrap();
        let mut rng = SeededRng::for_stage(1, Stage::B0Field);
        let (d, _) =
            apply_image_space_degradation(&x, &ImagePhysicsParams::default(), &mut rng).unwrap();
        assert!(d.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn uniform_attenuation_when_coil_and_b0_off() {
        let x = Volume::from_fn([6, 6, 6], [1.0; 3], |x, y, z| (x + y * z) as f64).unwrap();
        let p = ImagePhysicsParams {
            b0_strength: 0.0,
            coil_sensitivity: false,
            ..Default::default()
        };
        let a = (-p.te / p.t2).exp();
        let mut rng = SeededRng::for_stage(1, Stage::B0Field);
        let (d, _) = apply_image_space_degradation(&x, &p, &mut rng).unwrap();
        for (c, v) in d.data().iter().zip(x.data()) {
            assert!((c.re - a * v).abs() < 1e-12);
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn impulse_factor_by_factor() {
        let shape = [9, 9, 9];
        let mut x = vec![0.0; 729];
        x[linear_index(shape, 4, 4, 4)] = 1.0;
        let x = Volume::new(x, shape, [1.0; 3]).unwrap();
        let p = ImagePhysicsParams::default();
        let mut rng = SeededRng::for_stage(9, Stage::B0Field);
        let (d, fields) = apply_image_space_degradation(&x, &p, &mut rng).unwrap();

        // Rebuild each factor independently from the fresh stream.
        let s = coil_sensitivity_map(shape, [1.0; 3]).unwrap().get(4, 4, 4);
        let mut rng2 = SeededRng::for_stage(9, Stage::B0Field);
        let b0 = b0_field(
            shape,
            p.b0_strength,
            default_b0_correlation(shape),
            &mut rng2,
        )
        .unwrap();
        assert_eq!(b0, fields.b0);
        let grad = gradient_magnitude(&b0, [1.0; 3])[linear_index(shape, 4, 4, 4)];
        let t2s = 1.0 / (1.0 / p.t2 + p.grad_coupling * grad);
        let expected = s * (-p.te / t2s).exp();
        assert!((d.get(4, 4, 4).norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn magnitude_independent_of_phase_scale() {
        let x = Volume::from_fn([8, 8, 8], [1.0; 3], |x, y, z| 1.0 + (x * y + z) as f64).unwrap();
        let run = |scale: f64| {
            let p = ImagePhysicsParams {
                phase_scale: scale,
                ..Default::default()
            };
            let mut rng = SeededRng::for_stage(5, Stage::B0Field);
            apply_image_space_degradation(&x, &p, &mut rng).unwrap().0
        };
        let (a, b) = (run(1.0), run(3.7));
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u.norm() - v.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_input() {
        let x = Volume::filled([4, 4, 4], [1.0; 3], -1.0).unwrap();
        let mut rng = SeededRng::for_stage(1, Stage::B0Field);
        assert!(
            apply_image_space_degradation(&x, &ImagePhysicsParams::default(), &mut rng).is_err()
        );
    }

    #[test]
    fn default_coupling_shortens_t2_star_moderately() {
        let shape = [64, 64, 64];
        let mut rng = SeededRng::for_stage(0, Stage::B0Field);
        let b0 = b0_field(shape, 0.035, default_b0_correlation(shape), &mut rng).unwrap();
        let t = t2_star_map(&b0, [1.0; 3], 0.08, DEFAULT_GRAD_COUPLING).unwrap();
        let mut reduction: Vec<f64> = t.data.iter().map(|v| 1.0 - v / 0.08).collect();
        reduction.sort_by(f64::total_cmp);
        let median = reduction[reduction.len() / 2];
        assert!((0.10..=0.30).contains(&median), "median reduction {median}");
    }
}
