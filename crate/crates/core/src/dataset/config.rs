use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kspace::DegradationParams;
use crate::losses::LossConfig;
use crate::nifti::DataType;
use crate::sampling::ParamRanges;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sampling: ParamRanges,
    pub output: OutputConfig,
    pub loss: LossConfig,
    pub metrics: MetricsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// `float32`, `float64`, `int16` or `uint8`.
    pub datatype: String,
    /// Write `.nii.gz` instead of `.nii`.
    pub compressed: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            datatype: "float32".into(),
            compressed: false,
        }
    }
}

impl OutputConfig {
    pub fn datatype(&self) -> Result<DataType> {
        DataType::parse(&self.datatype)
    }

    pub fn extension(&self) -> &'static str {
        if self.compressed {
            "nii.gz"
        } else {
            "nii"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub metrics: Vec<String>,
    /// SSIM/PSNR dynamic range; the reference's max - min when unset.
    pub data_range: Option<f64>,
    pub label: u32,
    pub spectrum_bins: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            metrics: vec!["ssim".into(), "ms_ssim".into(), "psnr".into()],
            data_range: None,
            label: 1,
            spectrum_bins: 32,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.output.datatype()?;
        self.loss.validate()?;
        if self.metrics.spectrum_bins == 0 {
            return Err(Error::Config(
                "metrics.spectrum_bins must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Serialize)]
struct Fragment {
    sampling: ParamRanges,
}

/// A config containing only a `[sampling]` table whose ranges collapse to
/// the values of `p`.
pub fn preset_fragment(p: &DegradationParams) -> Result<String> {
    toml::to_string(&Fragment {
        sampling: ParamRanges::fixed(p),
    })
    .map_err(|e| Error::Config(e.to_string()))
}
