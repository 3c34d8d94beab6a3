//! Spatial-frequency training objective.
//!
//! `L = l_img * L1 + l_k * Lk + l_grad * Lgrad`, where
//!
//! * `L1` is the mean absolute voxel difference,
//! * `Lk` is the band-weighted mean of per-band means of
//!   `|log(1 + |F pred|) - log(1 + |F target|)|`, normalized by the weight sum,
//! * `Lgrad` is the mean of `| |grad pred| - |grad target| |` over the voxels
//!   where all three forward differences exist.
//!
//! Analytic (sub)gradients use `sign(0) = 0` at every kink.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{band_labels, RadialBandSpec};
use crate::error::{invalid, Result};
use crate::fft::{fft3_real, ifft3_centered};
use crate::volume::{check_same_shape, linear_index, ComplexVolume, Spacing, Volume};

pub const DEFAULT_BAND_WEIGHTS: [f64; 3] = [1.5, 1.0, 2.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_img: f64,
    pub lambda_k: f64,
    pub lambda_grad: f64,
    /// One weight per radial band, low to high.
    pub band_weights: Vec<f64>,
    pub band_spec: RadialBandSpec,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_img: 1.0,
            lambda_k: 1.0,
            lambda_grad: 1.0,
            band_weights: DEFAULT_BAND_WEIGHTS.to_vec(),
            band_spec: RadialBandSpec::default(),
        }
    }
}

impl LossConfig {
    pub fn with_lambdas(lambda_img: f64, lambda_k: f64, lambda_grad: f64) -> Self {
        Self {
            lambda_img,
            lambda_k,
            lambda_grad,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_img, self.lambda_k, self.lambda_grad];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("loss weights must be finite and non-negative"));
        }
        if lambdas.iter().all(|&l| l == 0.0) {
            return Err(invalid("at least one loss weight must be positive"));
        }
        self.band_spec.validate()?;
        if self.band_weights.len() != self.band_spec.n_bands() {
            return Err(invalid(format!(
                "{} band weights for {} bands",
                self.band_weights.len(),
                self.band_spec.n_bands()
            )));
        }
        if self
            .band_weights
            .iter()
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(invalid("band weights must be finite and non-negative"));
        }
        if self.band_weights.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("band weights must have a positive sum"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KspaceLoss {
    pub value: f64,
    pub per_band: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub l_img: f64,
    pub l_k: f64,
    pub l_grad: f64,
    pub per_band: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn loss_l1(pred: &Volume, target: &Volume) -> Result<f64> {
    check_same_shape(pred.shape(), target.shape())?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Band labels with per-band counts; errors if any band is empty.
fn band_layout(pred: &Volume, cfg: &LossConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    cfg.validate()?;
    let labels = band_labels(pred.shape(), &cfg.band_spec)?;
    let mut counts = vec![0usize; cfg.band_spec.n_bands()];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some(b) = counts.iter().position(|&c| c == 0) {
        return Err(invalid(format!(
            "band {b} is empty for shape {:?}",
            pred.shape()
        )));
    }
    Ok((labels, counts))
}

fn log_mag_diff(p: &ComplexVolume, t: &ComplexVolume) -> Vec<f64> {
    p.data()
        .iter()
        .zip(t.data())
        .map(|(a, b)| a.norm().ln_1p() - b.norm().ln_1p())
        .collect()
}

fn weight_sum(cfg: &LossConfig) -> f64 {
    cfg.band_weights.iter().sum()
}

pub fn loss_kspace(pred: &Volume, target: &Volume, cfg: &LossConfig) -> Result<KspaceLoss> {
    check_same_shape(pred.shape(), target.shape())?;
    let (labels, counts) = band_layout(pred, cfg)?;
    let diff = log_mag_diff(&fft3_real(pred)?, &fft3_real(target)?);
    let mut per_band = vec![0.0; counts.len()];
    for (d, &l) in diff.iter().zip(&labels) {
        per_band[l] += d.abs();
    }
    for (b, &c) in per_band.iter_mut().zip(&counts) {
        *b /= c as f64;
    }
    let value = per_band
        .iter()
        .zip(&cfg.band_weights)
        .map(|(t, w)| t * w)
        .sum::<f64>()
        / weight_sum(cfg);
    Ok(KspaceLoss { value, per_band })
}

fn check_gradient_shape(v: &Volume) -> Result<()> {
    if v.shape().iter().any(|&n| n < 2) {
        return Err(invalid(format!(
            "gradient loss needs every dimension >= 2, got {:?}",
            v.shape()
        )));
    }
    Ok(())
}

/// Forward differences at `(x, y, z)` divided by spacing.
fn forward_grad(v: &Volume, spacing: Spacing, x: usize, y: usize, z: usize) -> [f64; 3] {
    let c = v.get(x, y, z);
    [
        (v.get(x + 1, y, z) - c) / spacing[0],
        (v.get(x, y + 1, z) - c) / spacing[1],
        (v.get(x, y, z + 1) - c) / spacing[2],
    ]
}

fn norm3(g: [f64; 3]) -> f64 {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

fn valid_region(v: &Volume) -> impl Iterator<Item = [usize; 3]> {
    let [nx, ny, nz] = v.shape();
    (0..nz - 1)
        .flat_map(move |z| (0..ny - 1).flat_map(move |y| (0..nx - 1).map(move |x| [x, y, z])))
}

pub fn loss_gradient(pred: &Volume, target: &Volume, spacing: Spacing) -> Result<f64> {
    check_same_shape(pred.shape(), target.shape())?;
    check_gradient_shape(pred)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for [x, y, z] in valid_region(pred) {
        let gp = norm3(forward_grad(pred, spacing, x, y, z));
        let gt = norm3(forward_grad(target, spacing, x, y, z));
        sum += (gp - gt).abs();
        count += 1;
    }
    Ok(sum / count as f64)
}

pub fn loss_total(pred: &Volume, target: &Volume, cfg: &LossConfig) -> Result<LossBreakdown> {
    cfg.validate()?;
    let l_img = loss_l1(pred, target)?;
    let k = loss_kspace(pred, target, cfg)?;
    let l_grad = loss_gradient(pred, target, pred.spacing())?;
    let total = cfg.lambda_img * l_img + cfg.lambda_k * k.value + cfg.lambda_grad * l_grad;
    Ok(LossBreakdown {
        total,
        l_img,
        l_k: k.value,
        l_grad,
        per_band: k.per_band,
    })
}

/// `d L1 / d pred = sign(pred - target) / N`.
pub fn grad_l1(pred: &Volume, target: &Volume) -> Result<Vec<f64>> {
    check_same_shape(pred.shape(), target.shape())?;
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| sign(p - t) / n)
        .collect())
}

/// Gradient of the log-spectrum term through the adjoint of the centered FFT.
///
/// With `P = F pred`, `a = |P|` and per-coefficient weight `c_k`, the
/// derivative is `Re(F^H u)` for `u_k = c_k sign(d_k) P_k / (a_k (1 + a_k))`,
/// and `F^H = N * ifft`. Coefficients with `a_k = 0` contribute nothing.
pub fn grad_kspace(pred: &Volume, target: &Volume, cfg: &LossConfig) -> Result<Vec<f64>> {
    check_same_shape(pred.shape(), target.shape())?;
    let (labels, counts) = band_layout(pred, cfg)?;
    let p = fft3_real(pred)?;
    let diff = log_mag_diff(&p, &fft3_real(target)?);
    let wsum = weight_sum(cfg);
    let u: Vec<Complex64> = p
        .data()
        .iter()
        .zip(&diff)
        .zip(&labels)
        .map(|((pk, d), &l)| {
            let a = pk.norm();
            if a == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let c = cfg.band_weights[l] / (wsum * counts[l] as f64);
            pk * (c * sign(*d) / (a * (1.0 + a)))
        })
        .collect();
    let n = pred.len() as f64;
    let back = ifft3_centered(&ComplexVolume::new(u, pred.shape())?)?;
    Ok(back.data().iter().map(|z| n * z.re).collect())
}

/// Subgradient of the gradient-magnitude term, scattered onto the voxels each
/// forward difference touches.
pub fn grad_gradient(pred: &Volume, target: &Volume, spacing: Spacing) -> Result<Vec<f64>> {
    check_same_shape(pred.shape(), target.shape())?;
    check_gradient_shape(pred)?;
    let shape = pred.shape();
    let [nx, ny, nz] = shape;
    let count = ((nx - 1) * (ny - 1) * (nz - 1)) as f64;
    let mut out = vec![0.0; pred.len()];
    for [x, y, z] in valid_region(pred) {
        let g = forward_grad(pred, spacing, x, y, z);
        let gp = norm3(g);
        if gp == 0.0 {
            continue;
        }
        let gt = norm3(forward_grad(target, spacing, x, y, z));
        let s = sign(gp - gt);
        if s == 0.0 {
            continue;
        }
        let centre = linear_index(shape, x, y, z);
        let neighbours = [
            linear_index(shape, x + 1, y, z),
            linear_index(shape, x, y + 1, z),
            linear_index(shape, x, y, z + 1),
        ];
        for a in 0..3 {
            let d = s * g[a] / (gp * spacing[a] * count);
            out[neighbours[a]] += d;
            out[centre] -= d;
        }
    }
    Ok(out)
}

/// `d total / d pred` per voxel.
pub fn loss_total_grad(pred: &Volume, target: &Volume, cfg: &LossConfig) -> Result<Volume> {
    cfg.validate()?;
    check_same_shape(pred.shape(), target.shape())?;
    let mut out = vec![0.0; pred.len()];
    let mut accumulate = |lambda: f64, g: Vec<f64>| {
        for (o, v) in out.iter_mut().zip(g) {
            *o += lambda * v;
        }
    };
    if cfg.lambda_img != 0.0 {
        accumulate(cfg.lambda_img, grad_l1(pred, target)?);
    }
    if cfg.lambda_k != 0.0 {
        accumulate(cfg.lambda_k, grad_kspace(pred, target, cfg)?);
    }
    if cfg.lambda_grad != 0.0 {
        accumulate(
            cfg.lambda_grad,
            grad_gradient(pred, target, pred.spacing())?,
        );
    }
    Volume::new(out, pred.shape(), pred.spacing())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use rand::Rng;

    fn random_volume(shape: [usize; 3], seed: u64) -> Volume {
        let mut rng = SeededRng::new(seed, 0);
        let n = shape.iter().product();
        Volume::new(
            (0..n).map(|_| rng.random::<f64>()).collect(),
            shape,
            [1.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn l1_cases() {
        let t = random_volume([4, 4, 4], 1);
        assert_eq!(loss_l1(&t, &t).unwrap(), 0.0);
        let p = t.map(|v| v + 0.25).unwrap();
        assert!((loss_l1(&p, &t).unwrap() - 0.25).abs() < 1e-15);
        let p = random_volume([4, 4, 4], 2);
        let mut brute = 0.0;
        for i in 0..64 {
            brute += (p.data()[i] - t.data()[i]).abs();
        }
        assert!((loss_l1(&p, &t).unwrap() - brute / 64.0).abs() < 1e-14);
        assert!(loss_l1(&p, &random_volume([4, 4, 5], 0)).is_err());
    }

    #[test]
    fn kspace_zero_at_identity_and_weight_algebra() {
        let t = random_volume([6, 6, 6], 3);
        let k = loss_kspace(&t, &t, &LossConfig::default()).unwrap();
        assert_eq!(k.value, 0.0);
        assert!(k.per_band.iter().all(|&b| b == 0.0));

        let p = random_volume([6, 6, 6], 4);
        let equal = LossConfig {
            band_weights: vec![1.0, 1.0, 1.0],
            ..Default::default()
        };
        let k = loss_kspace(&p, &t, &equal).unwrap();
        let mean = k.per_band.iter().sum::<f64>() / 3.0;
        assert!((k.value - mean).abs() < 1e-14);
    }

    #[test]
    fn gradient_loss_cases() {
        let t = random_volume([5, 4, 6], 5);
        assert_eq!(loss_gradient(&t, &t, [1.0; 3]).unwrap(), 0.0);
        let shifted = t.map(|v| v + 3.0).unwrap();
        assert!(loss_gradient(&shifted, &t, [1.0; 3]).unwrap() < 1e-12);

        let ramp2 = Volume::from_fn([5, 5, 5], [1.0; 3], |x, _, _| 2.0 * x as f64).unwrap();
        let ramp1 = Volume::from_fn([5, 5, 5], [1.0; 3], |x, _, _| x as f64).unwrap();
        assert!((loss_gradient(&ramp2, &ramp1, [1.0; 3]).unwrap() - 1.0).abs() < 1e-14);
        let thin = Volume::zeros([1, 4, 4], [1.0; 3]).unwrap();
        assert!(loss_gradient(&thin, &thin, [1.0; 3]).is_err());
    }

    #[test]
    fn total_projection_and_zero() {
        let t = random_volume([4, 4, 4], 6);
        let p = random_volume([4, 4, 4], 7);
        let b = loss_total(&t, &t, &LossConfig::default()).unwrap();
        assert_eq!((b.total, b.l_img, b.l_k, b.l_grad), (0.0, 0.0, 0.0, 0.0));
        let only_l1 = LossConfig::with_lambdas(1.0, 0.0, 0.0);
        let b = loss_total(&p, &t, &only_l1).unwrap();
        assert_eq!(b.total, loss_l1(&p, &t).unwrap());
    }

    #[test]
    fn l1_gradient_is_sign_over_n() {
        let t = random_volume([4, 4, 4], 8);
        let p = random_volume([4, 4, 4], 9);
        let g = loss_total_grad(&p, &t, &LossConfig::with_lambdas(1.0, 0.0, 0.0)).unwrap();
        for i in 0..64 {
            assert_eq!(g.data()[i], (p.data()[i] - t.data()[i]).signum() / 64.0);
        }
        let z = loss_total_grad(&t, &t, &LossConfig::default()).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::with_lambdas(0.0, 0.0, 0.0).validate().is_err());
        let bad = LossConfig {
            band_weights: vec![1.0, 1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = LossConfig {
            band_weights: vec![0.0, 0.0, 0.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(LossConfig::default().band_weights, vec![1.5, 1.0, 2.0]);
    }
}
