//! 3D grid containers.
//!
//! All grids are stored with x varying fastest: the voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`, which is the NIfTI on-disk order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Shape = [usize; 3];
pub type Spacing = [f64; 3];
pub type Affine = [[f64; 4]; 4];

pub const IDENTITY_AFFINE: Affine = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// `diag(spacing, 1)`: voxel indices scaled to millimetres, no rotation or offset.
pub fn scaling_affine(spacing: Spacing) -> Affine {
    let mut a = IDENTITY_AFFINE;
    for i in 0..3 {
        a[i][i] = spacing[i];
    }
    a
}

#[inline]
pub fn voxel_count(shape: Shape) -> usize {
    shape[0] * shape[1] * shape[2]
}

#[inline]
pub fn linear_index(shape: Shape, x: usize, y: usize, z: usize) -> usize {
    x + shape[0] * (y + shape[1] * z)
}

#[inline]
pub fn coords(shape: Shape, i: usize) -> [usize; 3] {
    let x = i % shape[0];
    let y = (i / shape[0]) % shape[1];
    let z = i / (shape[0] * shape[1]);
    [x, y, z]
}

/// Index of the DC coefficient along an axis of length `n` after centering.
#[inline]
pub fn center_index(n: usize) -> usize {
    n / 2
}

pub(crate) fn check_shape(shape: Shape) -> Result<()> {
    if shape.contains(&0) {
        return Err(invalid(format!("shape {shape:?} has a zero dimension")));
    }
    Ok(())
}

pub(crate) fn check_spacing(spacing: Spacing) -> Result<()> {
    if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(invalid(format!(
            "spacing {spacing:?} must be finite and positive"
        )));
    }
    Ok(())
}

pub(crate) fn check_same_shape(a: Shape, b: Shape) -> Result<()> {
    if a != b {
        return Err(invalid(format!("shape mismatch: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Real-valued scalar volume with voxel spacing in millimetres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    data: Vec<f64>,
    shape: Shape,
    spacing: Spacing,
    affine: Affine,
}

impl Volume {
    pub fn new(data: Vec<f64>, shape: Shape, spacing: Spacing) -> Result<Self> {
        check_shape(shape)?;
        check_spacing(spacing)?;
        if data.len() != voxel_count(shape) {
            return Err(invalid(format!(
                "data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("volume contains non-finite values"));
        }
        Ok(Self {
            data,
            shape,
            spacing,
            affine: scaling_affine(spacing),
        })
    }

    pub fn zeros(shape: Shape, spacing: Spacing) -> Result<Self> {
        Self::new(vec![0.0; voxel_count(shape)], shape, spacing)
    }

    pub fn filled(shape: Shape, spacing: Spacing, value: f64) -> Result<Self> {
        Self::new(vec![value; voxel_count(shape)], shape, spacing)
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(
        shape: Shape,
        spacing: Spacing,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_shape(shape)?;
        let mut data = Vec::with_capacity(voxel_count(shape));
        for z in 0..shape[2] {
            for y in 0..shape[1] {
                for x in 0..shape[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(data, shape, spacing)
    }

    pub fn with_affine(mut self, affine: Affine) -> Self {
        self.affine = affine;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[linear_index(self.shape, x, y, z)]
    }

    /// Applies `f` voxelwise and keeps geometry. Fails if `f` produces a
    /// non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Ok(Self::new(data, self.shape, self.spacing)?.with_affine(self.affine))
    }

    pub fn to_complex(&self) -> ComplexVolume {
        ComplexVolume {
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            shape: self.shape,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Complex-valued 3D grid, used for image-space signals and k-space arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    data: Vec<Complex64>,
    shape: Shape,
}

impl ComplexVolume {
    pub fn new(data: Vec<Complex64>, shape: Shape) -> Result<Self> {
        check_shape(shape)?;
        if data.len() != voxel_count(shape) {
            return Err(invalid(format!(
                "data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(invalid("complex volume contains non-finite values"));
        }
        Ok(Self { data, shape })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); voxel_count(shape)], shape)
    }

    pub(crate) fn from_parts_unchecked(data: Vec<Complex64>, shape: Shape) -> Self {
        debug_assert_eq!(data.len(), voxel_count(shape));
        Self { data, shape }
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Complex64 {
        self.data[linear_index(self.shape, x, y, z)]
    }

    /// Complex magnitude as a real volume with the given spacing.
    pub fn magnitude(&self, spacing: Spacing) -> Result<Volume> {
        Volume::new(
            self.data.iter().map(|c| c.norm()).collect(),
            self.shape,
            spacing,
        )
    }

    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}

/// Real scalar map over a grid (coil sensitivity, B0, T2*, phase).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub data: Vec<f64>,
    pub shape: Shape,
}

impl ScalarField {
    pub fn new(data: Vec<f64>, shape: Shape) -> Result<Self> {
        check_shape(shape)?;
        if data.len() != voxel_count(shape) {
            return Err(invalid("field length does not match shape"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field contains non-finite values"));
        }
        Ok(Self { data, shape })
    }

    pub fn constant(shape: Shape, value: f64) -> Result<Self> {
        Self::new(vec![value; voxel_count(shape)], shape)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[linear_index(self.shape, x, y, z)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Integer label volume used for segmentation metrics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegMask {
    labels: Vec<u32>,
    shape: Shape,
    spacing_bits: [u64; 3],
}

impl SegMask {
    pub fn new(labels: Vec<u32>, shape: Shape, spacing: Spacing) -> Result<Self> {
        check_shape(shape)?;
        check_spacing(spacing)?;
        if labels.len() != voxel_count(shape) {
            return Err(invalid("label length does not match shape"));
        }
        Ok(Self {
            labels,
            shape,
            spacing_bits: spacing.map(f64::to_bits),
        })
    }

    pub fn zeros(shape: Shape, spacing: Spacing) -> Result<Self> {
        Self::new(vec![0; voxel_count(shape)], shape, spacing)
    }

    pub fn from_fn(
        shape: Shape,
        spacing: Spacing,
        mut f: impl FnMut(usize, usize, usize) -> u32,
    ) -> Result<Self> {
        check_shape(shape)?;
        let mut labels = Vec::with_capacity(voxel_count(shape));
        for z in 0..shape[2] {
            for y in 0..shape[1] {
                for x in 0..shape[0] {
                    labels.push(f(x, y, z));
                }
            }
        }
        Self::new(labels, shape, spacing)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing_bits.map(f64::from_bits)
    }

    pub fn with_spacing(&self, spacing: Spacing) -> Result<Self> {
        Self::new(self.labels.clone(), self.shape, spacing)
    }

    /// Binary membership of `label` per voxel.
    pub fn select(&self, label: u32) -> Vec<bool> {
        self.labels.iter().map(|&l| l == label).collect()
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let shape = [3, 4, 5];
        for i in 0..voxel_count(shape) {
            let [x, y, z] = coords(shape, i);
            assert_eq!(linear_index(shape, x, y, z), i);
        }
    }

    #[test]
    fn rejects_bad_volumes() {
        assert!(Volume::new(vec![0.0; 7], [2, 2, 2], [1.0; 3]).is_err());
        assert!(Volume::new(vec![0.0; 8], [2, 2, 2], [1.0, 0.0, 1.0]).is_err());
        assert!(Volume::new(vec![f64::NAN; 8], [2, 2, 2], [1.0; 3]).is_err());
        assert!(Volume::new(vec![], [0, 2, 2], [1.0; 3]).is_err());
    }

    #[test]
    fn from_fn_uses_x_fastest_order() {
        let v =
            Volume::from_fn([2, 3, 4], [1.0; 3], |x, y, z| (x + 10 * y + 100 * z) as f64).unwrap();
        assert_eq!(v.data()[1], 1.0);
        assert_eq!(v.data()[2], 10.0);
        assert_eq!(v.get(1, 2, 3), 321.0);
    }
}
