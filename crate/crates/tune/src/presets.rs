use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ulfsim::kspace::DegradationParams;

use crate::error::{ApiError, ApiResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub params: DegradationParams,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    #[serde(default)]
    pub notes: String,
}

/// Presets keyed by unique name, optionally mirrored to a JSON file.
#[derive(Debug, Default)]
pub struct PresetStore {
    presets: BTreeMap<String, Preset>,
    path: Option<PathBuf>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl PresetStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; later changes are written back to it.
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let presets = match std::fs::read(&path) {
            Ok(bytes) => {
                let list: Vec<Preset> = serde_json::from_slice(&bytes)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                list.into_iter().map(|p| (p.name.clone(), p)).collect()
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e),
        };
        Ok(Self {
            presets,
            path: Some(path),
        })
    }

    pub fn list(&self) -> Vec<Preset> {
        self.presets.values().cloned().collect()
    }

    pub fn get(&self, name: &str) -> ApiResult<Preset> {
        self.presets
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no preset named {name:?}")))
    }

    pub fn create(&mut self, preset: Preset) -> ApiResult<Preset> {
        if !valid_name(&preset.name) {
            return Err(ApiError::unprocessable(format!(
                "preset name {:?} must be 1-128 characters of [A-Za-z0-9._-]",
                preset.name
            )));
        }
        preset.params.validate()?;
        if self.presets.contains_key(&preset.name) {
            return Err(ApiError::conflict(format!(
                "preset {:?} already exists",
                preset.name
            )));
        }
        self.presets.insert(preset.name.clone(), preset.clone());
        self.persist()?;
        Ok(preset)
    }

    pub fn delete(&mut self, name: &str) -> ApiResult<()> {
        if self.presets.remove(name).is_none() {
            return Err(ApiError::not_found(format!("no preset named {name:?}")));
        }
        self.persist()
    }

    fn persist(&self) -> ApiResult<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        write_atomic(path, &self.list())
            .map_err(|e| ApiError::internal(format!("saving presets: {e}")))
    }
}

fn write_atomic(path: &Path, presets: &[Preset]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, presets)?;
    tmp.write_all(b"\n")?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str) -> Preset {
        Preset {
            name: name.into(),
            params: DegradationParams::default(),
            created_at: 0,
            notes: String::new(),
        }
    }

    #[test]
    fn crud_semantics() {
        let mut s = PresetStore::in_memory();
        s.create(preset("a")).unwrap();
        assert_eq!(s.create(preset("a")).unwrap_err().status, 409);
        assert_eq!(s.get("a").unwrap(), preset("a"));
        s.delete("a").unwrap();
        assert_eq!(s.get("a").unwrap_err().status, 404);
        assert_eq!(s.delete("a").unwrap_err().status, 404);
        assert_eq!(s.create(preset("bad name")).unwrap_err().status, 422);
    }

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("presets.json");
        let mut s = PresetStore::open(&path).unwrap();
        s.create(preset("keep")).unwrap();
        s.create(preset("drop")).unwrap();
        s.delete("drop").unwrap();
        let again = PresetStore::open(&path).unwrap();
        assert_eq!(again.list(), vec![preset("keep")]);
    }
}
