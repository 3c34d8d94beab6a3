//! Segmentation overlap and surface-distance metrics.
//!
//! The surface of a label set is every member voxel with at least one
//! 6-neighbour outside the set (voxels on the grid border count as surface).
//! Distances are between voxel centres in millimetres. Nearest-surface
//! distances come from an exact separable Euclidean distance transform.

use crate::error::{invalid, Error, Result};
use crate::volume::{coords, linear_index, SegMask, Shape, Spacing};

fn check_pair(a: &SegMask, b: &SegMask) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(invalid(format!(
            "mask shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_spacing(a: &SegMask, b: &SegMask) -> Result<Spacing> {
    if a.spacing() != b.spacing() {
        return Err(invalid(format!(
            "mask spacings differ: {:?} vs {:?}",
            a.spacing(),
            b.spacing()
        )));
    }
    Ok(a.spacing())
}

/// `2|A & B| / (|A| + |B|)`; 1 when both sets are empty.
pub fn dice(a: &SegMask, b: &SegMask, label: u32) -> Result<f64> {
    check_pair(a, b)?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        let (ia, ib) = (x == label, y == label);
        na += ia as usize;
        nb += ib as usize;
        inter += (ia && ib) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `100 (|A| - |B|) / |B|` with `b` the reference.
pub fn rve(a: &SegMask, b: &SegMask, label: u32) -> Result<f64> {
    check_pair(a, b)?;
    let nb = b.count(label);
    if nb == 0 {
        return Err(Error::UndefinedMetric(format!(
            "RVE: reference label {label} is empty"
        )));
    }
    Ok(100.0 * (a.count(label) as f64 - nb as f64) / nb as f64)
}

/// Indices of surface voxels of a binary set.
pub fn surface(set: &[bool], shape: Shape) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, &inside) in set.iter().enumerate() {
        if !inside {
            continue;
        }
        let p = coords(shape, i);
        let mut boundary = false;
        for a in 0..3 {
            for step in [-1isize, 1] {
                let q = p[a] as isize + step;
                if q < 0 || q >= shape[a] as isize {
                    boundary = true;
                } else {
                    let mut n = p;
                    n[a] = q as usize;
                    if !set[linear_index(shape, n[0], n[1], n[2])] {
                        boundary = true;
                    }
                }
            }
        }
        if boundary {
            out.push(i);
        }
    }
    out
}

/// 1D lower envelope of parabolas `s2 (p - q)^2 + f(q)` (Felzenszwalb &
/// Huttenlocher), skipping infinite sites.
fn edt_1d(f: &[f64], s2: f64, out: &mut [f64]) {
    let n = f.len();
    let mut sites: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n + 1);
    let key = |q: usize| f[q] + s2 * (q * q) as f64;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    bounds.clear();
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let s = (key(q) - key(v)) / (2.0 * s2 * (q as f64 - v as f64));
                    if s <= *bounds.last().unwrap() {
                        sites.pop();
                        bounds.pop();
                        if sites.is_empty() {
                            continue;
                        }
                    } else {
                        sites.push(q);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        while k + 1 < sites.len() && bounds[k + 1] < p as f64 {
            k += 1;
        }
        let d = p as f64 - sites[k] as f64;
        *o = s2 * d * d + f[sites[k]];
    }
}

/// Squared physical distance from every voxel to the nearest site.
pub fn squared_distance_transform(sites: &[bool], shape: Shape, spacing: Spacing) -> Vec<f64> {
    let mut d: Vec<f64> = sites
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    for axis in 0..3 {
        let n = shape[axis];
        let s2 = spacing[axis] * spacing[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for v in 0..shape[others[1]] {
            for u in 0..shape[others[0]] {
                let idx = |j: usize| {
                    let mut p = [0usize; 3];
                    p[axis] = j;
                    p[others[0]] = u;
                    p[others[1]] = v;
                    linear_index(shape, p[0], p[1], p[2])
                };
                for (j, l) in line.iter_mut().enumerate() {
                    *l = d[idx(j)];
                }
                edt_1d(&line, s2, &mut out);
                for (j, o) in out.iter().enumerate() {
                    d[idx(j)] = *o;
                }
            }
        }
    }
    d
}

/// Nearest-surface distances from each surface voxel of A to B's surface,
/// followed by those from B to A.
pub fn surface_distances(a: &SegMask, b: &SegMask, label: u32) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    let spacing = check_spacing(a, b)?;
    let shape = a.shape();
    let sa = surface(&a.select(label), shape);
    let sb = surface(&b.select(label), shape);
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "surface distance: label {label} is empty in {}",
            if sa.is_empty() {
                "prediction"
            } else {
                "reference"
            }
        )));
    }
    let mark = |s: &[usize]| {
        let mut m = vec![false; a.labels().len()];
        s.iter().for_each(|&i| m[i] = true);
        m
    };
    let dt_a = squared_distance_transform(&mark(&sa), shape, spacing);
    let dt_b = squared_distance_transform(&mark(&sb), shape, spacing);
    let mut out: Vec<f64> = sa.iter().map(|&i| dt_b[i].sqrt()).collect();
    out.extend(sb.iter().map(|&i| dt_a[i].sqrt()));
    Ok(out)
}

/// Percentile with linear interpolation between order statistics
/// (position `q (n - 1)` in the sorted sample).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn hd95(a: &SegMask, b: &SegMask, label: u32) -> Result<f64> {
    Ok(percentile(&surface_distances(a, b, label)?, 0.95))
}

pub fn assd(a: &SegMask, b: &SegMask, label: u32) -> Result<f64> {
    let d = surface_distances(a, b, label)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}
