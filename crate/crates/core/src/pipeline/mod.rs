//! Batch orchestration: configuration, per-(POI, patch) analysis and
//! report emission.

mod config;
pub mod naming;
mod report;
mod run;

pub use config::{
    validate_config, FeatureOptions, PatchConfig, PathsConfig, PipelineConfig, ReportConfig, DEFAULT_FEATURE_COLUMNS,
    DEFAULT_METRIC_COLUMNS,
};
pub use report::{emit_reports, Reports};
pub use run::{
    analyze_attributions, compute_features, prepare, run_pipeline, run_stages, ManifestCounts, MapOutcome, Pair,
    Prepared, RunManifest, Skipped, Stages,
};
