//! Batch corpus generation, manifests, splits and paired evaluation.

mod config;
mod eval;
mod generate;
mod manifest;
mod split;

pub use config::{preset_fragment, Config, MetricsConfig, OutputConfig};
pub use eval::{evaluate_pairs, EvalOptions, Metric, Report, Row, RowKind, REPORT_HEADER};
pub use generate::{discover_cases, generate_dataset, resolve_workers, WORKERS_ENV};
pub use manifest::{BandSummary, CaseRecord, Manifest, MANIFEST_FILE, SCHEMA_VERSION};
pub use split::{split_case_ids, split_manifest, Split, SplitSpec};

use std::path::Path;

use crate::error::Result;
use crate::metrics::spectrum_report;
use crate::nifti::read_volume;
use crate::volume::Volume;

/// Radial spectrum and band fractions of a volume as pretty JSON.
pub fn spectrum_json(v: &Volume, bins: usize) -> Result<String> {
    Ok(serde_json::to_string_pretty(&spectrum_report(v, bins)?)?)
}

pub fn spectrum_json_file(path: impl AsRef<Path>, bins: usize) -> Result<String> {
    spectrum_json(&read_volume(path)?, bins)
}
