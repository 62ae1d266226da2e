use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::naming::{attribution_file_name, prediction_file_name};
use super::report::{emit_reports, Reports};
use crate::blob::{blob_response, blobs_from_labeling, threshold_and_label, BlobSet};
use crate::error::{Error, Result};
use crate::features::{PatchFeatureContext, VesselFeatureRecord};
use crate::filters::{tubularity, FrangiFilter, FrangiParams, RidgeMode, VesselnessFilter};
use crate::graph::{build_graph, classify_status, select_pois, skeletonize, Poi, PredictionStatus, VesselGraph};
use crate::io::{read_f32, read_mask};
use crate::patch::{PatchGrid, PatchIndex};
use crate::stats::{attribution_metrics, AttributionMetrics};
use crate::volume::{Mask, Volume, VolumeKind};

/// Status of one (POI, patch) membership.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pair {
    pub poi_id: usize,
    pub patch: PatchIndex,
    pub status: PredictionStatus,
}

enum PredictionSource {
    Volume(Mask),
    PerPatch(PathBuf),
}

impl PredictionSource {
    fn open(path: &Path, grid: &PatchGrid) -> Result<Self> {
        if path.is_dir() {
            return Ok(PredictionSource::PerPatch(path.to_path_buf()));
        }
        let m = read_mask(path)?;
        if m.dims() != grid.volume_dims() {
            return Err(Error::DimensionMismatch(format!(
                "{}: prediction is {:?}, ground truth is {:?}",
                path.display(),
                m.dims().as_array(),
                grid.volume_dims().as_array()
            )));
        }
        Ok(PredictionSource::Volume(m))
    }

    fn patch(&self, grid: &PatchGrid, idx: PatchIndex) -> Result<Mask> {
        match self {
            PredictionSource::Volume(m) => grid.extract(m, idx),
            PredictionSource::PerPatch(dir) => {
                let path = dir.join(prediction_file_name(idx));
                let m = read_mask(&path)?;
                if m.dims() != grid.patch_dims() {
                    return Err(Error::DimensionMismatch(format!(
                        "{}: expected a {:?} patch",
                        path.display(),
                        grid.patch_dims().as_array()
                    )));
                }
                Ok(m)
            }
        }
    }
}

/// Inputs loaded and the graph, POIs and per-pair statuses derived.
pub struct Prepared {
    pub config: PipelineConfig,
    pub gt: Mask,
    pub image: Option<Volume<f32>>,
    pub grid: PatchGrid,
    pub graph: VesselGraph,
    pub pois: Vec<Poi>,
    /// Every (POI, patch) membership, sorted by POI id then patch.
    pub pairs: Vec<Pair>,
}

impl Prepared {
    pub fn passing(&self) -> impl Iterator<Item = &Pair> {
        self.pairs.iter().filter(|p| self.config.status_filter.contains(&p.status))
    }

    fn poi(&self, id: usize) -> &Poi {
        &self.pois[id]
    }
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    let gt = read_mask(&config.paths.gt)?;
    let grid = PatchGrid::new(gt.dims(), config.patch.size, config.patch.overlap)?;
    let image = match &config.paths.image {
        Some(p) => {
            let v = read_f32(p)?;
            if v.dims() != gt.dims() {
                return Err(Error::DimensionMismatch(format!("{}: image and ground truth differ in size", p.display())));
            }
            Some(v)
        }
        None => None,
    };
    let graph = build_graph(&skeletonize(&gt));
    let pois = select_pois(&graph, &gt, &grid)?;
    info!("graph: {} nodes, {} edges, {} POIs", graph.nodes.len(), graph.edges.len(), pois.len());

    let prediction = PredictionSource::open(&config.paths.prediction, &grid)?;
    let mut by_patch: BTreeMap<PatchIndex, Vec<usize>> = BTreeMap::new();
    for poi in &pois {
        for &idx in &poi.patch_memberships {
            by_patch.entry(idx).or_default().push(poi.id);
        }
    }
    let mut pairs = Vec::new();
    for (&idx, ids) in &by_patch {
        let pred = prediction.patch(&grid, idx)?;
        for &id in ids {
            let p = pois[id].position;
            let local = grid.to_local(idx, p)?;
            pairs.push(Pair {
                poi_id: id,
                patch: idx,
                status: classify_status(pred.is_set(local), gt.is_set(p)),
            });
        }
    }
    pairs.sort();
    Ok(Prepared {
        config: config.clone(),
        gt,
        image,
        grid,
        graph,
        pois,
        pairs,
    })
}

fn tubularity_params(config: &PipelineConfig) -> FrangiParams {
    FrangiParams {
        ridge_mode: RidgeMode::White,
        invert_blob_term: false,
        ..config.detector.frangi.clone()
    }
}

/// One feature row per (POI, patch) membership, whatever its status.
pub fn compute_features(prep: &Prepared) -> Result<Vec<VesselFeatureRecord>> {
    let patches: Vec<PatchIndex> = {
        let mut v: Vec<PatchIndex> = prep.pairs.iter().map(|p| p.patch).collect();
        v.dedup();
        v.sort();
        v.dedup();
        v
    };
    let filters: Vec<Box<dyn VesselnessFilter>> = vec![Box::new(FrangiFilter {
        params: tubularity_params(&prep.config),
    })];
    let per_patch: Vec<Vec<VesselFeatureRecord>> = patches
        .par_iter()
        .map(|&idx| {
            let gt = prep.grid.extract(&prep.gt, idx)?;
            let tub = if prep.config.features.tubularity {
                let src = match &prep.image {
                    Some(img) => prep.grid.extract(img, idx)?,
                    None => gt.map(VolumeKind::Intensity, f32::from),
                };
                tubularity(&src, &filters)?
            } else {
                Volume::zeros(gt.dims(), VolumeKind::Response)
            };
            let ctx = PatchFeatureContext::new(gt, tub);
            prep.pairs
                .iter()
                .filter(|p| p.patch == idx)
                .map(|p| {
                    let local = prep.grid.to_local(idx, prep.poi(p.poi_id).position)?;
                    ctx.record(p.poi_id, idx, p.status, local, prep.grid.border_distance(local))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<VesselFeatureRecord> = per_patch.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.poi_id, r.patch));
    Ok(rows)
}

/// Detection and statistics of one attribution map.
#[derive(Clone, Debug)]
pub struct MapOutcome {
    pub pair: Pair,
    pub map_id: String,
    pub blobs: BlobSet,
    pub metrics: AttributionMetrics,
    /// Blob counts for each sensitivity `min_component_size`.
    pub sensitivity: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub poi_id: usize,
    pub patch: PatchIndex,
    pub status: PredictionStatus,
    pub reason: String,
}

fn find_attribution(dir: &Path, pair: &Pair) -> Option<PathBuf> {
    let p = dir.join(attribution_file_name(pair.poi_id, pair.patch));
    if p.is_file() {
        return Some(p);
    }
    let gz = p.with_extension("nii.gz");
    gz.is_file().then_some(gz)
}

fn analyze_map(prep: &Prepared, pair: Pair, path: &Path) -> Result<MapOutcome> {
    let attr = read_f32(path)?;
    if attr.dims() != prep.grid.patch_dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}: attribution map is {:?}, patches are {:?}",
            path.display(),
            attr.dims().as_array(),
            prep.grid.patch_dims().as_array()
        )));
    }
    let params = &prep.config.detector;
    let response = blob_response(&attr, params)?;
    let labeled = threshold_and_label(&response, params)?;
    let blobs = blobs_from_labeling(attr.dims(), labeled.as_ref(), params.min_component_size);
    let sensitivity = prep
        .config
        .reports
        .sensitivity_min_sizes
        .iter()
        .map(|&s| match &labeled {
            None => 0,
            Some((_, l)) => l.components.iter().filter(|c| c.size >= s).count(),
        })
        .collect();
    let local = prep.grid.to_local(pair.patch, prep.poi(pair.poi_id).position)?;
    let metrics = attribution_metrics(&attr, &blobs, local)?;
    Ok(MapOutcome {
        map_id: super::naming::attribution_stem(pair.poi_id, pair.patch),
        pair,
        blobs,
        metrics,
        sensitivity,
    })
}

/// Blob detection and statistics for every pair passing the status
/// filter. Pairs without an attribution file are skipped and logged.
pub fn analyze_attributions(prep: &Prepared) -> Result<(Vec<MapOutcome>, Vec<Skipped>)> {
    let dir = &prep.config.paths.attributions;
    let work: Vec<(Pair, Option<PathBuf>)> = prep.passing().map(|p| (*p, find_attribution(dir, p))).collect();
    let mut skipped = Vec::new();
    for (pair, path) in &work {
        if path.is_none() {
            warn!(
                "skipping POI {} patch {}: {} not found",
                pair.poi_id,
                pair.patch,
                attribution_file_name(pair.poi_id, pair.patch)
            );
            skipped.push(Skipped {
                poi_id: pair.poi_id,
                patch: pair.patch,
                status: pair.status,
                reason: "missing attribution file".into(),
            });
        }
    }
    let maps = work
        .par_iter()
        .filter_map(|(pair, path)| path.as_ref().map(|p| analyze_map(prep, *pair, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok((maps, skipped))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub pois: usize,
    pub pairs: usize,
    pub pairs_passing_filter: usize,
    pub maps_analyzed: usize,
    pub maps_with_blobs: usize,
    pub skipped: usize,
    pub feature_rows: usize,
    pub blob_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub counts: ManifestCounts,
    pub stage_seconds: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// Analyzed plus skipped maps account for every pair passing the filter.
    pub fn rows_conserved(&self) -> bool {
        self.counts.maps_analyzed + self.counts.skipped == self.counts.pairs_passing_filter
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub features: bool,
    pub attributions: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        features: true,
        attributions: true,
    };
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

/// Runs the selected stages and writes their reports plus `manifest.json`
/// to the output directory.
pub fn run_stages(config: &PipelineConfig, stages: Stages) -> Result<RunManifest> {
    config.validate()?;
    with_pool(config.workers, || {
        let mut seconds = BTreeMap::new();
        let mut clock = Instant::now();
        let mut lap = |name: &str, seconds: &mut BTreeMap<String, f64>| {
            seconds.insert(name.to_string(), clock.elapsed().as_secs_f64());
            clock = Instant::now();
        };

        let prep = prepare(config)?;
        lap("prepare", &mut seconds);
        let features = if stages.features { Some(compute_features(&prep)?) } else { None };
        lap("features", &mut seconds);
        let (maps, skipped) = if stages.attributions {
            let (m, s) = analyze_attributions(&prep)?;
            (Some(m), s)
        } else {
            (None, Vec::new())
        };
        lap("attributions", &mut seconds);

        let reports = Reports::build(&prep, features, maps, skipped)?;
        let outputs = emit_reports(&reports, &config.paths.output)?;
        lap("reports", &mut seconds);

        let counts = ManifestCounts {
            pois: prep.pois.len(),
            pairs: prep.pairs.len(),
            pairs_passing_filter: prep.passing().count(),
            maps_analyzed: reports.maps.as_ref().map_or(0, Vec::len),
            maps_with_blobs: reports.maps.iter().flatten().filter(|m| !m.blobs.is_empty()).count(),
            skipped: reports.skipped.len(),
            feature_rows: reports.features.as_ref().map_or(0, Vec::len),
            blob_rows: reports.maps.iter().flatten().map(|m| m.blobs.len()).sum(),
        };
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            counts,
            stage_seconds: seconds,
            outputs,
        };
        if stages.attributions && !manifest.rows_conserved() {
            return Err(Error::Degenerate("row conservation violated".into()));
        }
        let path = config.paths.output.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
        info!(
            "{} maps analyzed, {} with blobs, {} skipped",
            manifest.counts.maps_analyzed, manifest.counts.maps_with_blobs, manifest.counts.skipped
        );
        Ok(manifest)
    })
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    run_stages(config, Stages::ALL)
}
