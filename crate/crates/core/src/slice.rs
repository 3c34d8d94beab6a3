//! 2D slices and intensity windowing for display.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kspace::Axis;
use crate::metrics::seg::percentile;
use crate::volume::Volume;

/// A plane of a volume, row-major with `width` columns.
///
/// Slicing along z gives columns x and rows y; along y, columns x and rows z;
/// along x, columns y and rows z.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

pub fn extract_slice(v: &Volume, axis: Axis, index: usize) -> Result<Slice> {
    let [nx, ny, nz] = v.shape();
    let n = v.shape()[axis.index()];
    if index >= n {
        return Err(Error::OutOfRange(format!(
            "slice index {index} outside 0..{n} along {axis:?}"
        )));
    }
    let (width, height) = match axis {
        Axis::X => (ny, nz),
        Axis::Y => (nx, nz),
        Axis::Z => (nx, ny),
    };
    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            data.push(match axis {
                Axis::X => v.get(index, col, row),
                Axis::Y => v.get(col, index, row),
                Axis::Z => v.get(col, row, index),
            });
        }
    }
    Ok(Slice {
        width,
        height,
        data,
    })
}

/// Intensities mapped linearly from `[lo, hi]` onto the full gray range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    /// Parses `"lo,hi"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [lo, hi] = parts[..] else {
            return Err(invalid(format!("window {s:?} must be \"lo,hi\"")));
        };
        let num = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("window bound {t:?} is not a finite number")))
        };
        let w = Self {
            lo: num(lo)?,
            hi: num(hi)?,
        };
        if w.lo > w.hi {
            return Err(invalid(format!(
                "window lower bound {} exceeds upper {}",
                w.lo, w.hi
            )));
        }
        Ok(w)
    }

    /// 1st to 99th percentile of the whole volume.
    pub fn percentile_default(v: &Volume) -> Self {
        Self {
            lo: percentile(v.data(), 0.01),
            hi: percentile(v.data(), 0.99),
        }
    }

    /// Gray level in `0..=max`; a degenerate window maps everything to 0.
    pub fn level(&self, value: f64, max: u32) -> u32 {
        if self.hi <= self.lo {
            return 0;
        }
        let t = ((value - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        (t * max as f64).round() as u32
    }
}

/// 8-bit gray levels of a slice.
pub fn to_gray8(s: &Slice, w: &Window) -> Vec<u8> {
    s.data.iter().map(|&v| w.level(v, 255) as u8).collect()
}

/// 16-bit gray levels of a slice.
pub fn to_gray16(s: &Slice, w: &Window) -> Vec<u16> {
    s.data.iter().map(|&v| w.level(v, 65535) as u16).collect()
}
