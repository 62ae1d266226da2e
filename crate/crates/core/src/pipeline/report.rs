use std::fs;
use std::path::Path;

use super::config::PipelineConfig;
use super::run::{MapOutcome, Prepared, Skipped};
use crate::error::{Error, Result};
use crate::features::VesselFeatureRecord;
use crate::graph::{write_poi_table, Poi, VesselGraph};
use crate::stats::{correlation_matrix, histogram, CorrelationMatrix, Histogram, StatsSummary, Table};

/// Everything a run reports, rows already in (POI id, patch) order.
pub struct Reports {
    pub config: PipelineConfig,
    pub graph: VesselGraph,
    pub pois: Vec<Poi>,
    pub features: Option<Vec<VesselFeatureRecord>>,
    pub maps: Option<Vec<MapOutcome>>,
    pub skipped: Vec<Skipped>,
    pub correlation: Option<CorrelationMatrix>,
    pub histograms: Vec<(&'static str, Vec<f64>)>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn feature_value(r: &VesselFeatureRecord, name: &str) -> Option<f64> {
    match name {
        "thickness" => r.thickness,
        "tubularity" => Some(r.tubularity),
        "relative_connectivity" => r.relative_connectivity.map(|v| v as f64),
        "patch_component_count" => Some(r.patch_component_count as f64),
        "patch_vessel_volume" => Some(r.patch_vessel_volume as f64),
        "poi_component_volume" => Some(r.poi_component_volume as f64),
        "border_distance" => Some(r.border_distance as f64),
        _ => None,
    }
}

fn summary_value(s: &StatsSummary, field: &str) -> Option<f64> {
    StatsSummary::FIELDS.iter().position(|f| *f == field).map(|i| s.values()[i])
}

fn metric_value(m: &MapOutcome, name: &str) -> Option<f64> {
    let x = &m.metrics;
    match name {
        "blob_count" => Some(x.blob_count as f64),
        "nearest_blob_distance" => x.nearest_blob_distance,
        "fisher_cnr" => x.fisher_cnr,
        "l1_ratio" => x.l1_ratio,
        _ => {
            if let Some(f) = name.strip_prefix("global_") {
                summary_value(&x.global, f)
            } else {
                summary_value(x.local.as_ref()?, name.strip_prefix("local_")?)
            }
        }
    }
}

fn is_metric_column(name: &str) -> bool {
    matches!(name, "blob_count" | "nearest_blob_distance" | "fisher_cnr" | "l1_ratio")
        || ["global_", "local_"]
            .iter()
            .any(|p| name.strip_prefix(p).is_some_and(|f| StatsSummary::FIELDS.contains(&f)))
}

impl Reports {
    pub fn build(
        prep: &Prepared,
        features: Option<Vec<VesselFeatureRecord>>,
        mut maps: Option<Vec<MapOutcome>>,
        mut skipped: Vec<Skipped>,
    ) -> Result<Self> {
        if let Some(m) = maps.as_mut() {
            m.sort_by_key(|o| (o.pair.poi_id, o.pair.patch));
        }
        skipped.sort_by_key(|s| (s.poi_id, s.patch));
        let cfg = &prep.config.reports;

        let correlation = match (&features, &maps) {
            (Some(f), Some(m)) => {
                for name in &cfg.correlation_features {
                    if !super::config::DEFAULT_FEATURE_COLUMNS.contains(&name.as_str()) {
                        return Err(Error::UnknownColumn(name.clone()));
                    }
                }
                for name in &cfg.correlation_metrics {
                    if !is_metric_column(name) {
                        return Err(Error::UnknownColumn(name.clone()));
                    }
                }
                let mut table = Table::new(m.len());
                let joined: Vec<Option<&VesselFeatureRecord>> = m
                    .iter()
                    .map(|o| {
                        f.binary_search_by_key(&(o.pair.poi_id, o.pair.patch), |r| (r.poi_id, r.patch))
                            .ok()
                            .map(|i| &f[i])
                    })
                    .collect();
                for name in &cfg.correlation_features {
                    table.insert(name.clone(), joined.iter().map(|r| feature_value((*r)?, name)).collect())?;
                }
                for name in &cfg.correlation_metrics {
                    table.insert(name.clone(), m.iter().map(|o| metric_value(o, name)).collect())?;
                }
                let fs: Vec<&str> = cfg.correlation_features.iter().map(String::as_str).collect();
                let ms: Vec<&str> = cfg.correlation_metrics.iter().map(String::as_str).collect();
                Some(correlation_matrix(&table, &fs, &ms)?)
            }
            _ => None,
        };

        let mut histograms = Vec::new();
        if let Some(m) = &maps {
            histograms.push(("blob_sizes", m.iter().flat_map(|o| o.blobs.blobs.iter().map(|b| b.size as f64)).collect()));
            histograms.push(("distances", m.iter().flat_map(|o| o.metrics.distances.iter().copied()).collect()));
        }
        if let Some(f) = &features {
            histograms.push(("vessel_sizes", f.iter().map(|r| r.poi_component_volume as f64).collect()));
        }

        Ok(Reports {
            config: prep.config.clone(),
            graph: prep.graph.clone(),
            pois: prep.pois.clone(),
            features,
            maps,
            skipped,
            correlation,
            histograms,
        })
    }
}

struct CsvOut {
    w: csv::Writer<fs::File>,
}

impl CsvOut {
    fn create(path: &Path, header: &[String]) -> Result<Self> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        Ok(CsvOut { w })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        Ok(self.w.write_record(&fields)?)
    }

    fn finish(mut self, path: &Path) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(path, e))
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn write_features(rows: &[VesselFeatureRecord], path: &Path) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &strings(&[
            "poi_id",
            "patch",
            "status",
            "thickness",
            "tubularity",
            "relative_connectivity",
            "patch_component_count",
            "patch_vessel_volume",
            "poi_component_volume",
            "border_distance",
        ]),
    )?;
    for r in rows {
        out.row(vec![
            r.poi_id.to_string(),
            r.patch.to_string(),
            r.status.to_string(),
            opt(r.thickness),
            r.tubularity.to_string(),
            opt(r.relative_connectivity),
            r.patch_component_count.to_string(),
            r.patch_vessel_volume.to_string(),
            r.poi_component_volume.to_string(),
            r.border_distance.to_string(),
        ])?;
    }
    out.finish(path)
}

fn write_attribution(maps: &[MapOutcome], path: &Path) -> Result<()> {
    let mut header = strings(&[
        "poi_id",
        "patch",
        "status",
        "blob_count",
        "nearest_blob_distance",
        "fisher_cnr",
        "l1_ratio",
    ]);
    for prefix in ["global", "local"] {
        header.extend(StatsSummary::FIELDS.iter().map(|f| format!("{prefix}_{f}")));
    }
    let mut out = CsvOut::create(path, &header)?;
    for m in maps {
        let x = &m.metrics;
        let mut row = vec![
            m.pair.poi_id.to_string(),
            m.pair.patch.to_string(),
            m.pair.status.to_string(),
            x.blob_count.to_string(),
            opt(x.nearest_blob_distance),
            opt(x.fisher_cnr),
            opt(x.l1_ratio),
        ];
        row.extend(x.global.values().iter().map(f64::to_string));
        match &x.local {
            Some(l) => row.extend(l.values().iter().map(f64::to_string)),
            None => row.extend(StatsSummary::FIELDS.iter().map(|_| String::new())),
        }
        out.row(row)?;
    }
    out.finish(path)
}

fn write_blobs(maps: &[MapOutcome], path: &Path) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &strings(&["map_id", "blob_label", "size_voxels", "cx", "cy", "cz", "mean_attr_in_blob"]),
    )?;
    for m in maps {
        for (b, mean) in m.blobs.blobs.iter().zip(&m.metrics.blob_means) {
            out.row(vec![
                m.map_id.clone(),
                b.label.to_string(),
                b.size.to_string(),
                b.centroid[0].to_string(),
                b.centroid[1].to_string(),
                b.centroid[2].to_string(),
                mean.to_string(),
            ])?;
        }
    }
    out.finish(path)
}

fn write_distances(maps: &[MapOutcome], path: &Path) -> Result<()> {
    let mut out = CsvOut::create(path, &strings(&["poi_id", "patch", "blob_label", "distance"]))?;
    for m in maps {
        for (b, d) in m.blobs.blobs.iter().zip(&m.metrics.distances) {
            out.row(vec![
                m.pair.poi_id.to_string(),
                m.pair.patch.to_string(),
                b.label.to_string(),
                d.to_string(),
            ])?;
        }
    }
    out.finish(path)
}

fn write_skipped(rows: &[Skipped], path: &Path) -> Result<()> {
    let mut out = CsvOut::create(path, &strings(&["poi_id", "patch", "status", "reason"]))?;
    for s in rows {
        out.row(vec![s.poi_id.to_string(), s.patch.to_string(), s.status.to_string(), s.reason.clone()])?;
    }
    out.finish(path)
}

fn write_sensitivity(sizes: &[usize], maps: &[MapOutcome], path: &Path) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &strings(&["min_component_size", "maps", "maps_with_blobs", "total_blobs", "mean_blobs_per_map"]),
    )?;
    for (k, s) in sizes.iter().enumerate() {
        let counts: Vec<usize> = maps.iter().map(|m| m.sensitivity[k]).collect();
        let total: usize = counts.iter().sum();
        let mean = if maps.is_empty() { None } else { Some(total as f64 / maps.len() as f64) };
        out.row(vec![
            s.to_string(),
            maps.len().to_string(),
            counts.iter().filter(|&&c| c > 0).count().to_string(),
            total.to_string(),
            opt(mean),
        ])?;
    }
    out.finish(path)
}

fn write_histogram(values: &[f64], bins: usize, path: &Path) -> Result<()> {
    let mut out = CsvOut::create(path, &strings(&["bin_left", "bin_right", "count"]))?;
    if !values.is_empty() {
        let Histogram { edges, counts, .. } = histogram(values, bins, None)?;
        for (i, c) in counts.iter().enumerate() {
            out.row(vec![edges[i].to_string(), edges[i + 1].to_string(), c.to_string()])?;
        }
    }
    out.finish(path)
}

fn write_correlation(c: &CorrelationMatrix, dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("correlation.csv");
    let mut out = CsvOut::create(&path, &strings(&["feature", "metric", "spearman", "n"]))?;
    for (i, f) in c.rows.iter().enumerate() {
        for (j, m) in c.cols.iter().enumerate() {
            out.row(vec![f.clone(), m.clone(), opt(c.values[i][j]), c.counts[i][j].to_string()])?;
        }
    }
    out.finish(&path)?;
    let json = dir.join("correlation.json");
    fs::write(&json, serde_json::to_string_pretty(c)? + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(vec!["correlation.csv".into(), "correlation.json".into()])
}

/// Writes every available table to `out_dir` and returns the file names.
pub fn emit_reports(r: &Reports, out_dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut file = |name: &str| {
        written.push(name.to_string());
        out_dir.join(name)
    };
    r.graph.write(file("graph.json"))?;
    write_poi_table(&r.pois, file("pois.csv"))?;
    if let Some(f) = &r.features {
        write_features(f, &file("features.csv"))?;
    }
    if let Some(m) = &r.maps {
        write_attribution(m, &file("attribution.csv"))?;
        write_blobs(m, &file("blobs.csv"))?;
        write_distances(m, &file("distances.csv"))?;
        write_skipped(&r.skipped, &file("skipped.csv"))?;
        write_sensitivity(&r.config.reports.sensitivity_min_sizes, m, &file("sensitivity.csv"))?;
    }
    for (name, values) in &r.histograms {
        write_histogram(values, r.config.reports.histogram_bins, &file(&format!("hist_{name}.csv")))?;
    }
    if let Some(c) = &r.correlation {
        written.extend(write_correlation(c, out_dir)?);
    }
    Ok(written)
}
