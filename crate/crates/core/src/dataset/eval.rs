use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::discover_cases;
use crate::error::{invalid, Error, Result};
use crate::metrics::{assd, dice, hd95, ms_ssim, psnr, rve, ssim, SsimParams};
use crate::nifti::{read_mask, read_volume};
use crate::volume::Volume;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ssim,
    MsSsim,
    Psnr,
    Dice,
    Hd95,
    Assd,
    Rve,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Ssim,
        Metric::MsSsim,
        Metric::Psnr,
        Metric::Dice,
        Metric::Hd95,
        Metric::Assd,
        Metric::Rve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ssim => "ssim",
            Metric::MsSsim => "ms_ssim",
            Metric::Psnr => "psnr",
            Metric::Dice => "dice",
            Metric::Hd95 => "hd95",
            Metric::Assd => "assd",
            Metric::Rve => "rve",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| invalid(format!("unknown metric {s:?}")))
    }

    /// Comma-separated list such as `ssim,psnr,dice`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Self::parse)
            .collect()
    }

    fn is_segmentation(self) -> bool {
        matches!(
            self,
            Metric::Dice | Metric::Hd95 | Metric::Assd | Metric::Rve
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Intensity range for SSIM, MS-SSIM and PSNR; per-case reference
    /// `max - min` when `None`.
    pub data_range: Option<f64>,
    pub label: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            data_range: None,
            label: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Case,
    Aggregate,
    Missing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    pub case_id: String,
    pub metric: Option<Metric>,
    /// `None` when the metric is undefined for this case.
    pub value: Option<f64>,
    /// Population standard deviation, aggregate rows only.
    pub std: Option<f64>,
    /// Number of cases aggregated, aggregate rows only.
    pub n: Option<usize>,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<Row>,
}

pub const REPORT_HEADER: &str = "kind\tcase_id\tmetric\tvalue\tstd\tn\tnote";

fn fmt_value(v: Option<f64>) -> String {
    match v {
        None => "NA".into(),
        Some(x) if x.is_nan() => "NA".into(),
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) if x == f64::NEG_INFINITY => "-inf".into(),
        Some(x) => format!("{x}"),
    }
}

impl Report {
    pub fn case_rows(&self, metric: Metric) -> impl Iterator<Item = &Row> {
        self.rows
            .iter()
            .filter(move |r| r.kind == RowKind::Case && r.metric == Some(metric))
    }

    pub fn aggregate(&self, metric: Metric) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.kind == RowKind::Aggregate && r.metric == Some(metric))
    }

    pub fn missing(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.kind == RowKind::Missing)
    }

    /// Tab-separated table with [`REPORT_HEADER`] as the first line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let kind = match r.kind {
                RowKind::Case => "case",
                RowKind::Aggregate => "aggregate",
                RowKind::Missing => "missing",
            };
            let n = r.n.map_or_else(|| "NA".into(), |n| n.to_string());
            let metric = r.metric.map_or("NA", Metric::name);
            let _ = writeln!(
                out,
                "{kind}\t{}\t{metric}\t{}\t{}\t{n}\t{}",
                r.case_id,
                fmt_value(r.value),
                fmt_value(r.std),
                r.note
            );
        }
        out
    }
}

/// Mean and population standard deviation; infinite when any value is
/// infinite, in which case the deviation is undefined.
fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if !mean.is_finite() {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, Some(var.sqrt()))
}

fn intensity_metric(
    m: Metric,
    pred: &Volume,
    reference: &Volume,
    opts: &EvalOptions,
) -> Result<f64> {
    let range = match opts.data_range {
        Some(r) => r,
        None => {
            let (lo, hi) = reference.min_max();
            if hi > lo {
                hi - lo
            } else {
                return Err(Error::UndefinedMetric(
                    "reference is constant; pass an explicit data range".into(),
                ));
            }
        }
    };
    let params = SsimParams::with_data_range(range);
    match m {
        Metric::Ssim => ssim(pred, reference, &params),
        Metric::MsSsim => ms_ssim(pred, reference, &params).map(|r| r.value),
        Metric::Psnr => psnr(pred, reference, range),
        _ => unreachable!(),
    }
}

fn case_rows(
    id: &str,
    pred: &Path,
    reference: &Path,
    metrics: &[Metric],
    opts: &EvalOptions,
) -> Vec<Row> {
    let row = |metric: Metric, r: Result<f64>| {
        let (value, note) = match r {
            Ok(v) => (Some(v), String::new()),
            Err(e) => (None, e.to_string().replace(['\t', '\n'], " ")),
        };
        Row {
            kind: RowKind::Case,
            case_id: id.to_owned(),
            metric: Some(metric),
            value,
            std: None,
            n: None,
            note,
        }
    };
    let needs_volumes = metrics.iter().any(|m| !m.is_segmentation());
    let needs_masks = metrics.iter().any(|m| m.is_segmentation());
    let volumes =
        needs_volumes.then(|| Ok::<_, Error>((read_volume(pred)?, read_volume(reference)?)));
    let masks = needs_masks.then(|| Ok::<_, Error>((read_mask(pred)?, read_mask(reference)?)));
    let fail = |e: &Error| Err(Error::InvalidInput(e.to_string()));
    metrics
        .iter()
        .map(|&m| {
            let value = if m.is_segmentation() {
                match masks.as_ref().unwrap() {
                    Err(e) => fail(e),
                    Ok((p, r)) => match m {
                        Metric::Dice => dice(p, r, opts.label),
                        Metric::Hd95 => hd95(p, r, opts.label),
                        Metric::Assd => assd(p, r, opts.label),
                        Metric::Rve => rve(p, r, opts.label),
                        _ => unreachable!(),
                    },
                }
            } else {
                match volumes.as_ref().unwrap() {
                    Err(e) => fail(e),
                    Ok((p, r)) => intensity_metric(m, p, r, opts),
                }
            };
            row(m, value)
        })
        .collect()
}

fn index(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(discover_cases(dir)?.into_iter().collect())
}

/// Compares every case id present in both directories. Ids found on only
/// one side produce a `missing` row; the aggregate for each metric covers
/// the cases where it is defined.
pub fn evaluate_pairs(
    pred_dir: &Path,
    ref_dir: &Path,
    metrics: &[Metric],
    opts: &EvalOptions,
) -> Result<Report> {
    if metrics.is_empty() {
        return Err(invalid("no metrics requested"));
    }
    let pred = index(pred_dir)?;
    let reference = index(ref_dir)?;
    let mut ids: Vec<&String> = pred.keys().chain(reference.keys()).collect();
    ids.sort();
    ids.dedup();

    let mut report = Report::default();
    let mut missing = Vec::new();
    for id in ids {
        match (pred.get(id), reference.get(id)) {
            (Some(p), Some(r)) => report.rows.extend(case_rows(id, p, r, metrics, opts)),
            (p, _) => missing.push(Row {
                kind: RowKind::Missing,
                case_id: id.clone(),
                metric: None,
                value: None,
                std: None,
                n: None,
                note: if p.is_none() {
                    "no prediction"
                } else {
                    "no reference"
                }
                .into(),
            }),
        }
    }
    for &m in metrics {
        let values: Vec<f64> = report.case_rows(m).filter_map(|r| r.value).collect();
        let (value, std) = if values.is_empty() {
            (None, None)
        } else {
            let (mean, std) = mean_std(&values);
            (Some(mean), std)
        };
        report.rows.push(Row {
            kind: RowKind::Aggregate,
            case_id: "*".into(),
            metric: Some(m),
            value,
            std,
            n: Some(values.len()),
            note: String::new(),
        });
    }
    report.rows.extend(missing);
    Ok(report)
}
