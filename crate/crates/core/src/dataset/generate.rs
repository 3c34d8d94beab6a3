use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::Config;
use super::manifest::{
    sha256_hex, BandSummary, CaseRecord, Manifest, MANIFEST_FILE, SCHEMA_VERSION,
};
use crate::error::{invalid, Error, Result};
use crate::kspace::synthesize_ulf;
use crate::nifti::{case_id_of, encode_file, has_nifti_extension, read_volume};
use crate::rng::{SeededRng, Stage};
use crate::sampling::sample_params_with;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ULFSIM_WORKERS";

/// The flag value if given, else `ULFSIM_WORKERS`, else the number of CPUs.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(invalid("--workers must be at least 1"))
        } else {
            Ok(n)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "{WORKERS_ENV}={v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// NIfTI files in `dir` as `(case_id, path)`, sorted by case id.
pub fn discover_cases(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut cases = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && has_nifti_extension(&path) {
            if let Some(id) = case_id_of(&path) {
                cases.push((id, path));
            }
        }
    }
    cases.sort();
    for w in cases.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(invalid(format!(
                "case id {:?} appears twice ({} and {})",
                w[0].0,
                w[0].1.display(),
                w[1].1.display()
            )));
        }
    }
    Ok(cases)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run_case(
    index: usize,
    case_id: &str,
    input: &Path,
    output_dir: &Path,
    global_seed: u64,
    config: &Config,
) -> Result<CaseRecord> {
    let hf = read_volume(input)?;
    let mut rng = SeededRng::for_case(global_seed, index as u64, Stage::Params);
    let params = sample_params_with(&mut rng, &config.sampling);
    let (ulf, report) = synthesize_ulf(&hf, &params)?;
    let bytes = encode_file(&ulf, config.output.datatype()?, config.output.compressed)?;
    let out_name = format!("{case_id}.{}", config.output.extension());
    let mut tmp = tempfile::NamedTempFile::new_in(output_dir)?;
    tmp.write_all(&bytes)?;
    tmp.persist(output_dir.join(&out_name))
        .map_err(|e| Error::Io(e.error))?;
    Ok(CaseRecord {
        case_id: case_id.to_owned(),
        input_path: file_name(input),
        output_path: Some(out_name),
        params: Some(report.params),
        achieved_fraction: Some(report.achieved_fraction),
        band_energy: Some(BandSummary {
            pre: report.band_energy_pre,
            post: report.band_energy_post,
        }),
        checksum: Some(sha256_hex(&bytes)),
        error: None,
    })
}

/// Degrades every NIfTI volume in `input_dir` into `output_dir` and writes
/// `manifest.json` there. Case `i` in sorted case-id order draws its
/// parameters from substream `i` of `global_seed`, so results do not depend
/// on the worker count. A failing case becomes an error record.
pub fn generate_dataset(
    input_dir: &Path,
    output_dir: &Path,
    global_seed: u64,
    config: &Config,
    workers: usize,
) -> Result<Manifest> {
    config.validate()?;
    let cases = discover_cases(input_dir).map_err(|e| {
        invalid(format!(
            "cannot list input directory {}: {e}",
            input_dir.display()
        ))
    })?;
    if cases.is_empty() {
        return Err(invalid(format!(
            "input directory {} contains no .nii or .nii.gz volumes",
            input_dir.display()
        )));
    }
    fs::create_dir_all(output_dir)?;
    // Fail before any work if the output directory is not writable.
    tempfile::NamedTempFile::new_in(output_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    let records: Vec<CaseRecord> = pool.install(|| {
        cases
            .par_iter()
            .enumerate()
            .map(|(i, (id, path))| {
                run_case(i, id, path, output_dir, global_seed, config).unwrap_or_else(|e| {
                    CaseRecord {
                        case_id: id.clone(),
                        input_path: file_name(path),
                        output_path: None,
                        params: None,
                        achieved_fraction: None,
                        band_energy: None,
                        checksum: None,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        global_seed,
        input_dir: input_dir.to_string_lossy().into_owned(),
        config: config.clone(),
        cases: records,
    };
    manifest.write_atomic(output_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
