//! PSNR, SSIM and MS-SSIM on whole 3D volumes.
//!
//! SSIM uses an isotropic Gaussian window (sigma 1.5, support 11). Near the
//! borders the window is truncated to the volume and renormalized, so the
//! local statistics exist at every voxel and the index is the mean over all
//! voxels. Because both the window and its truncation are separable, the
//! statistics are computed with three 1D passes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::volume::{check_same_shape, linear_index, Shape, Volume};

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// `10 log10(D^2 / MSE)`; `+inf` when the volumes are identical.
pub fn psnr(pred: &Volume, reference: &Volume, data_range: f64) -> Result<f64> {
    check_same_shape(pred.shape(), reference.shape())?;
    if !(data_range.is_finite() && data_range > 0.0) {
        return Err(invalid("data_range must be positive"));
    }
    let mse = pred
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub sigma: f64,
    /// Window support per axis (odd).
    pub support: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L` in `C1 = (k1 L)^2`, `C2 = (k2 L)^2`.
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            support: 11,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn with_data_range(data_range: f64) -> Self {
        Self {
            data_range,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.support == 0 || self.support.is_multiple_of(2) {
            return Err(invalid("SSIM window support must be odd"));
        }
        if !(self.sigma > 0.0 && self.data_range > 0.0) {
            return Err(invalid("SSIM sigma and data_range must be positive"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.support / 2) as isize;
        (-r..=r)
            .map(|d| (-((d * d) as f64) / (2.0 * self.sigma * self.sigma)).exp())
            .collect()
    }

    fn constants(&self) -> (f64, f64) {
        let c1 = (self.k1 * self.data_range).powi(2);
        let c2 = (self.k2 * self.data_range).powi(2);
        (c1, c2)
    }
}

/// Renormalized 1D filtering of every line along `axis`.
fn filter_axis(src: &[f64], shape: Shape, axis: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let n = shape[axis] as isize;
    let mut out = vec![0.0; src.len()];
    for z in 0..shape[2] {
        for y in 0..shape[1] {
            for x in 0..shape[0] {
                let p = [x, y, z];
                let pos = p[axis] as isize;
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for (j, w) in kernel.iter().enumerate() {
                    let q = pos + j as isize - r;
                    if q < 0 || q >= n {
                        continue;
                    }
                    let mut c = p;
                    c[axis] = q as usize;
                    acc += w * src[linear_index(shape, c[0], c[1], c[2])];
                    wsum += w;
                }
                out[linear_index(shape, x, y, z)] = acc / wsum;
            }
        }
    }
    out
}

fn gaussian_mean(src: &[f64], shape: Shape, kernel: &[f64]) -> Vec<f64> {
    let a = filter_axis(src, shape, 0, kernel);
    let b = filter_axis(&a, shape, 1, kernel);
    filter_axis(&b, shape, 2, kernel)
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_components(a: &[f64], b: &[f64], shape: Shape, params: &SsimParams) -> (f64, f64) {
    let kernel = params.kernel();
    let (c1, c2) = params.constants();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|y| y * y).collect();
    let mu_a = gaussian_mean(a, shape, &kernel);
    let mu_b = gaussian_mean(b, shape, &kernel);
    let e_aa = gaussian_mean(&aa, shape, &kernel);
    let e_bb = gaussian_mean(&bb, shape, &kernel);
    let e_ab = gaussian_mean(&ab, shape, &kernel);
    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    let n = a.len() as f64;
    (ssim_sum / n, cs_sum / n)
}

fn check_window_fits(shape: Shape, params: &SsimParams) -> Result<()> {
    if shape.iter().any(|&n| n < params.support) {
        return Err(invalid(format!(
            "volume {shape:?} is smaller than the {}-voxel SSIM window",
            params.support
        )));
    }
    Ok(())
}

pub fn ssim(pred: &Volume, reference: &Volume, params: &SsimParams) -> Result<f64> {
    check_same_shape(pred.shape(), reference.shape())?;
    params.validate()?;
    check_window_fits(pred.shape(), params)?;
    Ok(ssim_components(pred.data(), reference.data(), pred.shape(), params).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsSsim {
    pub value: f64,
    /// Scales actually used (at most 5).
    pub scales: usize,
    /// Weights after renormalization to the used scales.
    pub weights: Vec<f64>,
}

/// 2x2x2 average pooling; odd trailing planes are dropped.
pub fn downsample2(data: &[f64], shape: Shape) -> (Vec<f64>, Shape) {
    let out_shape = shape.map(|n| n / 2);
    let mut out = Vec::with_capacity(out_shape.iter().product());
    for z in 0..out_shape[2] {
        for y in 0..out_shape[1] {
            for x in 0..out_shape[0] {
                let mut acc = 0.0;
                for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            acc += data[linear_index(shape, 2 * x + dx, 2 * y + dy, 2 * z + dz)];
                        }
                    }
                }
                out.push(acc / 8.0);
            }
        }
    }
    (out, out_shape)
}

/// Number of dyadic scales at which the window still fits, capped at 5.
pub fn feasible_scales(shape: Shape, support: usize) -> usize {
    let mut s = shape;
    let mut count = 0;
    while count < MS_SSIM_WEIGHTS.len() && s.iter().all(|&n| n >= support) {
        count += 1;
        s = s.map(|n| n / 2);
    }
    count
}

/// Multi-scale SSIM, `prod_j cs_j^w_j * ssim_M^w_M`. The scale count drops
/// when the volume is too small and the weights are renormalized; negative
/// per-scale terms are clamped to zero before exponentiation.
pub fn ms_ssim(pred: &Volume, reference: &Volume, params: &SsimParams) -> Result<MsSsim> {
    check_same_shape(pred.shape(), reference.shape())?;
    params.validate()?;
    let scales = feasible_scales(pred.shape(), params.support);
    if scales < 2 {
        return Err(invalid(format!(
            "MS-SSIM needs at least 2 scales; {:?} admits {scales}",
            pred.shape()
        )));
    }
    let wsum: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let weights: Vec<f64> = MS_SSIM_WEIGHTS[..scales].iter().map(|w| w / wsum).collect();
    let mut a = pred.data().to_vec();
    let mut b = reference.data().to_vec();
    let mut shape = pred.shape();
    let mut value = 1.0;
    for (j, w) in weights.iter().enumerate() {
        let (s, cs) = ssim_components(&a, &b, shape, params);
        let term = if j + 1 == scales { s } else { cs };
        value *= term.max(0.0).powf(*w);
        if j + 1 < scales {
            let (na, ns) = downsample2(&a, shape);
            let (nb, _) = downsample2(&b, shape);
            a = na;
            b = nb;
            shape = ns;
        }
    }
    Ok(MsSsim {
        value,
        scales,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use rand::Rng;

    fn random_volume(shape: Shape, seed: u64) -> Volume {
        let mut rng = SeededRng::new(seed, 3);
        let n = shape.iter().product();
        Volume::new(
            (0..n).map(|_| rng.random::<f64>()).collect(),
            shape,
            [1.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn psnr_cases() {
        let r = random_volume([4, 4, 4], 1);
        assert_eq!(psnr(&r, &r, 1.0).unwrap(), f64::INFINITY);
        let p = r.map(|v| v + 0.1).unwrap();
        assert!((psnr(&p, &r, 2.0).unwrap() - 20.0 * (2.0f64 / 0.1).log10()).abs() < 1e-9);
        assert!(psnr(&p, &r, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let r = random_volume([12, 12, 12], 2);
        assert_eq!(ssim(&r, &r, &SsimParams::default()).unwrap(), 1.0);
        let binary = r.map(|v| if v > 0.5 { 1.0 } else { 0.0 }).unwrap();
        let flipped = binary.map(|v| 1.0 - v).unwrap();
        assert!(ssim(&flipped, &binary, &SsimParams::default()).unwrap() < 0.0);
        let small = random_volume([10, 12, 12], 2);
        assert!(ssim(&small, &small, &SsimParams::default()).is_err());
    }

    #[test]
    fn ms_ssim_scale_rules() {
        assert_eq!(feasible_scales([64, 64, 64], 11), 3);
        assert_eq!(feasible_scales([22, 22, 22], 11), 2);
        assert_eq!(feasible_scales([21, 40, 40], 11), 1);
        assert_eq!(feasible_scales([400, 400, 400], 11), 5);
        let r = random_volume([22, 24, 22], 4);
        let m = ms_ssim(&r, &r, &SsimParams::default()).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.scales, 2);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let tiny = random_volume([16, 16, 16], 4);
        assert!(ms_ssim(&tiny, &tiny, &SsimParams::default()).is_err());
    }

    #[test]
    fn downsample_averages_blocks() {
        let v = Volume::from_fn([4, 2, 3], [1.0; 3], |x, y, z| (x + y + z) as f64).unwrap();
        let (d, s) = downsample2(v.data(), v.shape());
        assert_eq!(s, [2, 1, 1]);
        assert_eq!(d, vec![1.5, 3.5]);
    }
}
