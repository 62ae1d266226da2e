use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blob::BlobDetectorParams;
use crate::error::{Error, Result};
use crate::graph::PredictionStatus;
use crate::patch::{DEFAULT_OVERLAP, DEFAULT_PATCH_SIZE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Ground-truth vessel mask.
    pub gt: PathBuf,
    /// Intensity image for tubularity; the mask is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    /// Whole-volume prediction file, or a directory of per-patch files.
    pub prediction: PathBuf,
    pub attributions: PathBuf,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    pub size: usize,
    pub overlap: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            size: DEFAULT_PATCH_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    /// Sample multiscale-Frangi tubularity at each POI.
    pub tubularity: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { tubularity: true }
    }
}

pub const DEFAULT_FEATURE_COLUMNS: [&str; 7] = [
    "thickness",
    "tubularity",
    "relative_connectivity",
    "patch_component_count",
    "patch_vessel_volume",
    "poi_component_volume",
    "border_distance",
];

pub const DEFAULT_METRIC_COLUMNS: [&str; 12] = [
    "blob_count",
    "nearest_blob_distance",
    "fisher_cnr",
    "l1_ratio",
    "global_mean",
    "global_std",
    "global_l1_mean",
    "global_p50",
    "global_p99",
    "local_mean",
    "local_std",
    "local_l1_mean",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub histogram_bins: usize,
    pub correlation_features: Vec<String>,
    pub correlation_metrics: Vec<String>,
    /// `min_component_size` values for the blob-count sensitivity table.
    pub sensitivity_min_sizes: Vec<usize>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            histogram_bins: 20,
            correlation_features: DEFAULT_FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            correlation_metrics: DEFAULT_METRIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
            sensitivity_min_sizes: vec![2, 5, 10],
        }
    }
}

fn default_status_filter() -> BTreeSet<PredictionStatus> {
    BTreeSet::from([PredictionStatus::TP])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub patch: PatchConfig,
    #[serde(default)]
    pub detector: BlobDetectorParams,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default = "default_status_filter")]
    pub status_filter: BTreeSet<PredictionStatus>,
    #[serde(default)]
    pub reports: ReportConfig,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl PipelineConfig {
    /// Config with every option at its default.
    pub fn new(paths: PathsConfig) -> Self {
        PipelineConfig {
            paths,
            patch: PatchConfig::default(),
            detector: BlobDetectorParams::default(),
            features: FeatureOptions::default(),
            status_filter: default_status_filter(),
            reports: ReportConfig::default(),
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.gt);
        if let Some(p) = self.paths.image.as_mut() {
            fix(p);
        }
        fix(&mut self.paths.prediction);
        fix(&mut self.paths.attributions);
        fix(&mut self.paths.output);
    }

    /// Checks invariants that do not need the input volumes.
    pub fn check_values(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.patch.size == 0 {
            return cfg("patch.size must be > 0".into());
        }
        if !(0.0..0.5).contains(&self.patch.overlap) {
            return cfg(format!("patch.overlap must be in [0, 0.5), got {}", self.patch.overlap));
        }
        self.detector.validate().map_err(|e| Error::Config(format!("detector: {e}")))?;
        if self.status_filter.is_empty() {
            return cfg("status_filter must not be empty".into());
        }
        if self.reports.histogram_bins == 0 {
            return cfg("reports.histogram_bins must be >= 1".into());
        }
        if self.reports.sensitivity_min_sizes.contains(&0) {
            return cfg("reports.sensitivity_min_sizes entries must be >= 1".into());
        }
        if self.workers == Some(0) {
            return cfg("workers must be >= 1".into());
        }
        Ok(())
    }

    /// Value checks plus existence of every input path.
    pub fn validate(&self) -> Result<()> {
        self.check_values()?;
        let mut inputs = vec![("paths.gt", &self.paths.gt), ("paths.prediction", &self.paths.prediction)];
        inputs.push(("paths.attributions", &self.paths.attributions));
        if let Some(p) = &self.paths.image {
            inputs.push(("paths.image", p));
        }
        for (name, p) in inputs {
            if !p.exists() {
                return Err(Error::Config(format!("{name}: {} does not exist", p.display())));
            }
        }
        if !self.paths.attributions.is_dir() {
            return Err(Error::Config(format!(
                "paths.attributions: {} is not a directory",
                self.paths.attributions.display()
            )));
        }
        Ok(())
    }
}

/// Reads, resolves relative paths against the file's directory, fills
/// defaults and validates.
pub fn validate_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = PipelineConfig::from_json(&text)?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    config.validate()?;
    Ok(config)
}
