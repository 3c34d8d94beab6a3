use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Config;
use crate::error::{Error, Result};
use crate::kspace::DegradationParams;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// One input case. Successful cases carry every field except `error`;
/// failed cases carry only `case_id`, `input_path` and `error`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    /// Relative to the manifest's `input_dir`.
    pub input_path: String,
    /// Relative to the directory holding the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<DegradationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_energy: Option<BandSummary>,
    /// Hex SHA-256 of the output file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub global_seed: u64,
    pub input_dir: String,
    pub config: Config,
    pub cases: Vec<CaseRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Unsupported(format!(
                "manifest schema version {} (expected {SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write_atomic(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_json()?.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn ok_cases(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(|c| c.is_ok())
    }

    /// Case ids whose output is missing or whose checksum does not match,
    /// resolving output paths against `root`.
    pub fn verify_checksums(&self, root: impl AsRef<Path>) -> Vec<String> {
        let root = root.as_ref();
        self.ok_cases()
            .filter(|c| {
                let (Some(out), Some(sum)) = (&c.output_path, &c.checksum) else {
                    return true;
                };
                match std::fs::read(root.join(out)) {
                    Ok(bytes) => sha256_hex(&bytes) != *sum,
                    Err(_) => true,
                }
            })
            .map(|c| c.case_id.clone())
            .collect()
    }

    /// `(case_id, offending fields)` for every record outside the configured
    /// sampling ranges.
    pub fn range_violations(&self) -> Vec<(String, Vec<&'static str>)> {
        self.ok_cases()
            .filter_map(|c| {
                let p = c.params.as_ref()?;
                let v = self.config.sampling.violations(p);
                (!v.is_empty()).then(|| (c.case_id.clone(), v))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            schema_version: SCHEMA_VERSION,
            global_seed: 3,
            input_dir: "in".into(),
            config: Config::default(),
            cases: vec![
                CaseRecord {
                    case_id: "a".into(),
                    input_path: "a.nii".into(),
                    output_path: Some("a.nii".into()),
                    params: Some(DegradationParams::default()),
                    achieved_fraction: Some(0.5),
                    band_energy: Some(BandSummary {
                        pre: vec![0.9, 0.08, 0.02],
                        post: vec![0.95, 0.04, 0.01],
                    }),
                    checksum: Some(sha256_hex(b"xyz")),
                    error: None,
                },
                CaseRecord {
                    case_id: "b".into(),
                    input_path: "b.nii".into(),
                    output_path: None,
                    params: None,
                    achieved_fraction: None,
                    band_energy: None,
                    checksum: None,
                    error: Some("corrupt".into()),
                },
            ],
        }
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        let back: Manifest = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn atomic_write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        sample().write_atomic(&path).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), sample());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn checksum_verification() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.nii"), b"xyz").unwrap();
        assert!(sample().verify_checksums(dir.path()).is_empty());
        std::fs::write(dir.path().join("a.nii"), b"xyw").unwrap();
        assert_eq!(sample().verify_checksums(dir.path()), vec!["a".to_string()]);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
