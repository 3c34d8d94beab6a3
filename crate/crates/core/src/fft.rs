//! Centered 3D discrete Fourier transforms.
//!
//! Both the image and the spectrum are indexed so that the origin sits at
//! `n / 2` along every axis:
//!
//! `K[k] = sum_r x[r] * exp(-2*pi*i * sum_axes (k - c)(r - c) / n)`
//!
//! The forward transform is unnormalized; the inverse carries the `1/N` factor.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::volume::{center_index, voxel_count, ComplexVolume, Shape, Volume};

fn check_finite(v: &ComplexVolume) -> Result<()> {
    if v.data()
        .iter()
        .any(|c| !(c.re.is_finite() && c.im.is_finite()))
    {
        return Err(invalid("non-finite value in transform input"));
    }
    Ok(())
}

/// Transforms every line along `axis` in place. Each line is rotated so that
/// index `c` lands on 0, transformed, then rotated back.
fn transform_axis(data: &mut [Complex64], shape: Shape, axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let n = shape[axis];
    if n == 1 {
        return;
    }
    let c = center_index(n);
    let stride = match axis {
        0 => 1,
        1 => shape[0],
        _ => shape[0] * shape[1],
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = voxel_count(shape);
    for start in 0..total {
        // A line start is any index whose coordinate along `axis` is zero.
        if (start / stride) % n != 0 {
            continue;
        }
        for (j, slot) in line.iter_mut().enumerate() {
            *slot = data[start + ((j + c) % n) * stride];
        }
        fft.process_with_scratch(&mut line, &mut scratch);
        for (j, value) in line.iter().enumerate() {
            data[start + ((j + c) % n) * stride] = *value;
        }
    }
}

fn transform(v: &ComplexVolume, direction: FftDirection) -> ComplexVolume {
    let shape = v.shape();
    let mut data = v.data().to_vec();
    let mut planner = FftPlanner::new();
    for axis in 0..3 {
        let fft = planner.plan_fft(shape[axis], direction);
        transform_axis(&mut data, shape, axis, &fft);
    }
    ComplexVolume::from_parts_unchecked(data, shape)
}

/// Forward centered transform (sum convention, DC at `n/2`).
pub fn fft3_centered(v: &ComplexVolume) -> Result<ComplexVolume> {
    check_finite(v)?;
    Ok(transform(v, FftDirection::Forward))
}

/// Inverse centered transform with `1/(nx*ny*nz)` normalization.
pub fn ifft3_centered(k: &ComplexVolume) -> Result<ComplexVolume> {
    check_finite(k)?;
    let mut out = transform(k, FftDirection::Inverse);
    let scale = 1.0 / out.len() as f64;
    for c in out.data_mut() {
        *c *= scale;
    }
    Ok(out)
}

/// Forward transform of a real volume.
pub fn fft3_real(v: &Volume) -> Result<ComplexVolume> {
    fft3_centered(&v.to_complex())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::linear_index;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn impulse_at_center_is_flat() {
        let shape = [4, 4, 4];
        let mut data = vec![c(0.0); 64];
        data[linear_index(shape, 2, 2, 2)] = c(1.0);
        let k = fft3_centered(&ComplexVolume::new(data, shape).unwrap()).unwrap();
        for z in k.data() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_volume_maps_to_dc() {
        let shape = [8, 8, 8];
        let v = ComplexVolume::new(vec![c(1.5); 512], shape).unwrap();
        let k = fft3_centered(&v).unwrap();
        let dc = linear_index(shape, 4, 4, 4);
        for (i, z) in k.data().iter().enumerate() {
            if i == dc {
                assert!((z - c(1.5 * 512.0)).norm() < 1e-10);
            } else {
                assert!(z.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn inverse_of_dc_is_constant() {
        let shape = [8, 8, 8];
        let mut data = vec![c(0.0); 512];
        data[linear_index(shape, 4, 4, 4)] = c(512.0);
        let v = ifft3_centered(&ComplexVolume::new(data, shape).unwrap()).unwrap();
        for z in v.data() {
            assert!((z - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_spectrum_inverts_to_zero() {
        let k = ComplexVolume::zeros([5, 4, 3]).unwrap();
        let v = ifft3_centered(&k).unwrap();
        assert!(v.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn singleton_axes_are_identity() {
        let v = ComplexVolume::new(vec![c(2.0), c(-1.0)], [1, 2, 1]).unwrap();
        let k = fft3_centered(&v).unwrap();
        // n = 2, c = 1: K[0] = x0*e^{-i pi (0-1)(0-1)} + x1 = -x0 + x1 and K[1] = x0 + x1.
        assert!((k.data()[0] - c(-3.0)).norm() < 1e-12);
        assert!((k.data()[1] - c(1.0)).norm() < 1e-12);
    }
}
