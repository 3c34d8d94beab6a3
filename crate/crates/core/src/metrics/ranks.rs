//! Concordance statistics for reader rankings (readers x methods).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub readers: usize,
    pub methods: usize,
    /// Kendall's W with tie correction.
    pub kendall_w: f64,
    /// Friedman chi-square, `m (n - 1) W`.
    pub friedman_chi2: f64,
    /// Upper tail of chi-square with `n - 1` degrees of freedom.
    pub p_value: f64,
    /// Mean Spearman rho over all reader pairs.
    pub mean_spearman_rho: f64,
}

/// 1-based ranks with ties given the mean of the positions they occupy.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `sum (t^3 - t)` over tie groups of a rank row.
fn tie_term(row: &[f64]) -> f64 {
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Each row is one reader's ranks of the methods; rows must already be
/// (mid)ranks, i.e. equal to [`midranks`] of themselves.
pub fn rank_stats(matrix: &[Vec<f64>]) -> Result<RankStats> {
    let m = matrix.len();
    if m < 2 {
        return Err(invalid("need at least two readers"));
    }
    let n = matrix[0].len();
    if n < 2 {
        return Err(invalid("need at least two methods"));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(format!(
                "reader {i} ranks {} methods, expected {n}",
                row.len()
            )));
        }
        let expected = midranks(row);
        if row.iter().zip(&expected).any(|(r, e)| (r - e).abs() > 1e-9) {
            return Err(invalid(format!(
                "reader {i} row {row:?} is not a valid ranking"
            )));
        }
    }
    let (mf, nf) = (m as f64, n as f64);
    let sums: Vec<f64> = (0..n)
        .map(|j| matrix.iter().map(|row| row[j]).sum())
        .collect();
    let mean = mf * (nf + 1.0) / 2.0;
    let s: f64 = sums.iter().map(|r| (r - mean) * (r - mean)).sum();
    let ties: f64 = matrix.iter().map(|row| tie_term(row)).sum();
    let denom = mf * mf * (nf * nf * nf - nf) - mf * ties;
    if denom <= 0.0 {
        return Err(invalid("every reader tied every method; W is undefined"));
    }
    let kendall_w = 12.0 * s / denom;
    let friedman_chi2 = mf * (nf - 1.0) * kendall_w;
    let p_value = ChiSquared::new(nf - 1.0)
        .map_err(|e| invalid(e.to_string()))?
        .sf(friedman_chi2);

    let mut rho_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in i + 1..m {
            rho_sum += pearson(&matrix[i], &matrix[j]).ok_or_else(|| {
                invalid(format!(
                    "Spearman rho undefined: reader {i} or {j} has constant ranks"
                ))
            })?;
            pairs += 1;
        }
    }
    Ok(RankStats {
        readers: m,
        methods: n,
        kendall_w,
        friedman_chi2,
        p_value,
        mean_spearman_rho: rho_sum / pairs as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_handle_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn perfect_agreement() {
        let row = vec![1.0, 2.0, 3.0, 4.0];
        let s = rank_stats(&[row.clone(), row.clone(), row]).unwrap();
        assert!((s.kendall_w - 1.0).abs() < 1e-12);
        assert!((s.mean_spearman_rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_pair() {
        let s = rank_stats(&[vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]]).unwrap();
        assert!((s.mean_spearman_rho + 1.0).abs() < 1e-12);
        assert!(s.kendall_w.abs() < 1e-12);
    }

    #[test]
    fn malformed_rows() {
        assert!(rank_stats(&[vec![1.0, 2.0]]).is_err());
        assert!(rank_stats(&[vec![1.0, 2.0], vec![1.0, 2.0, 3.0]]).is_err());
        assert!(rank_stats(&[vec![1.0, 1.0], vec![1.0, 2.0]]).is_err());
        assert!(rank_stats(&[vec![1.0, 3.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn ties_reduce_denominator() {
        let m = vec![
            vec![1.0, 2.5, 2.5, 4.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.5, 1.5, 3.0, 4.0],
        ];
        let s = rank_stats(&m).unwrap();
        assert!(s.kendall_w > 0.0 && s.kendall_w <= 1.0);
    }
}
