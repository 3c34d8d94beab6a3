//! Radial frequency geometry of a centered spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::volume::{center_index, coords, voxel_count, ComplexVolume, Shape};

/// Normalized radii separating consecutive bands. `n` boundaries give `n + 1`
/// bands; the default gives the low, mid and high bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBandSpec {
    pub boundaries: Vec<f64>,
}

impl Default for RadialBandSpec {
    fn default() -> Self {
        Self {
            boundaries: vec![1.0 / 3.0, 2.0 / 3.0],
        }
    }
}

impl RadialBandSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        let spec = Self { boundaries };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(invalid("band spec needs at least one boundary"));
        }
        if self.boundaries.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(invalid("band boundaries must lie in (0, 1)"));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("band boundaries must be strictly increasing"));
        }
        Ok(())
    }

    pub fn n_bands(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Band containing normalized radius `r`: band `i` covers `[b_{i-1}, b_i)`.
    pub fn band_of(&self, r: f64) -> usize {
        self.boundaries.iter().take_while(|&&b| r >= b).count()
    }
}

/// Normalized distance `r(k)` from the DC index, in `[0, 1]`.
///
/// Each axis offset is divided by `max(c, 1)` with `c = n / 2`, and the
/// Euclidean norm is divided by `sqrt(3)` so the grid corner sits at 1.
pub fn normalized_radius(shape: Shape) -> Vec<f64> {
    let centers = shape.map(center_index);
    let scales = centers.map(|c| c.max(1) as f64);
    (0..voxel_count(shape))
        .map(|i| {
            let k = coords(shape, i);
            let sq: f64 = (0..3)
                .map(|a| {
                    let u = (k[a] as f64 - centers[a] as f64) / scales[a];
                    u * u
                })
                .sum();
            (sq.sqrt() / 3f64.sqrt()).min(1.0)
        })
        .collect()
}

/// Band label of every coefficient.
pub fn band_labels(shape: Shape, spec: &RadialBandSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    if shape.iter().any(|&n| n < 2) {
        return Err(invalid(format!(
            "band masks need every dimension >= 2, got {shape:?}"
        )));
    }
    Ok(normalized_radius(shape)
        .into_iter()
        .map(|r| spec.band_of(r))
        .collect())
}

/// One binary mask per band; together they partition the grid.
pub fn band_masks(shape: Shape, spec: &RadialBandSpec) -> Result<Vec<Vec<bool>>> {
    let labels = band_labels(shape, spec)?;
    Ok((0..spec.n_bands())
        .map(|b| labels.iter().map(|&l| l == b).collect())
        .collect())
}

/// Sum of `|K|^2` over the coefficients selected by `mask`.
pub fn spectral_energy(k: &ComplexVolume, mask: &[bool]) -> Result<f64> {
    if mask.len() != k.len() {
        return Err(invalid(format!(
            "mask length {} does not match spectrum length {}",
            mask.len(),
            k.len()
        )));
    }
    Ok(k.data()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| c.norm_sqr())
        .sum())
}

/// Fraction of total spectral energy in each band. All zeros for a zero spectrum.
pub fn band_energy_fractions(k: &ComplexVolume, spec: &RadialBandSpec) -> Result<Vec<f64>> {
    let labels = band_labels(k.shape(), spec)?;
    let mut energy = vec![0.0; spec.n_bands()];
    for (c, &l) in k.data().iter().zip(&labels) {
        energy[l] += c.norm_sqr();
    }
    let total: f64 = energy.iter().sum();
    if total > 0.0 {
        energy.iter_mut().for_each(|e| *e /= total);
    }
    Ok(energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::linear_index;
    use num_complex::Complex64;

    #[test]
    fn masks_partition_grid() {
        let masks = band_masks([8, 8, 8], &RadialBandSpec::default()).unwrap();
        assert_eq!(masks.len(), 3);
        for i in 0..512 {
            assert_eq!(masks.iter().filter(|m| m[i]).count(), 1);
        }
        let total: usize = masks.iter().map(|m| m.iter().filter(|&&b| b).count()).sum();
        assert_eq!(total, 512);
    }

    #[test]
    fn dc_is_low_band() {
        for b in [0.01, 0.5, 0.99] {
            let spec = RadialBandSpec::new(vec![b]).unwrap();
            let masks = band_masks([6, 7, 8], &spec).unwrap();
            assert!(masks[0][linear_index([6, 7, 8], 3, 3, 4)]);
        }
    }

    #[test]
    fn counts_match_direct_enumeration() {
        // Independent per-index classification with the radius written out longhand.
        let mut expected = [0usize; 3];
        for x in 0..8i32 {
            for y in 0..8i32 {
                for z in 0..8i32 {
                    let (u, v, w) = (
                        (x - 4) as f64 / 4.0,
                        (y - 4) as f64 / 4.0,
                        (z - 4) as f64 / 4.0,
                    );
                    let r = (u * u + v * v + w * w).sqrt() / 3f64.sqrt();
                    let band = if r < 1.0 / 3.0 {
                        0
                    } else if r < 2.0 / 3.0 {
                        1
                    } else {
                        2
                    };
                    expected[band] += 1;
                }
            }
        }
        let masks = band_masks([8, 8, 8], &RadialBandSpec::default()).unwrap();
        let got: Vec<usize> = masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .collect();
        assert_eq!(got, expected.to_vec());
        assert!(expected.iter().all(|&c| c > 0));
    }

    #[test]
    fn rejects_bad_specs_and_shapes() {
        assert!(RadialBandSpec::new(vec![0.5, 0.4]).is_err());
        assert!(RadialBandSpec::new(vec![0.0]).is_err());
        assert!(RadialBandSpec::new(vec![1.0]).is_err());
        assert!(band_masks([1, 8, 8], &RadialBandSpec::default()).is_err());
    }

    #[test]
    fn energy_zero_and_mismatch() {
        let k = ComplexVolume::zeros([4, 4, 4]).unwrap();
        assert_eq!(spectral_energy(&k, &[true; 64]).unwrap(), 0.0);
        assert!(spectral_energy(&k, &[true; 63]).is_err());
        let k = ComplexVolume::new(vec![Complex64::new(1.0, 1.0); 64], [4, 4, 4]).unwrap();
        assert_eq!(spectral_energy(&k, &[true; 64]).unwrap(), 128.0);
    }
}
