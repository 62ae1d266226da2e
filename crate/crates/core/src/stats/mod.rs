//! Attribution statistics: descriptive summaries, Fisher CNR, L1 ratio,
//! Spearman correlation and histograms.

mod table;

use serde::{Deserialize, Serialize};

use crate::blob::{blob_poi_distances, BlobSet};
use crate::error::{Error, Result};
use crate::volume::{Volume, Voxel};

pub use table::{correlation_matrix, CorrelationMatrix, Table};

pub const PERCENTILES: [f64; 7] = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub p1: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub p99: f64,
    pub l1_mean: f64,
}

impl StatsSummary {
    pub const FIELDS: [&'static str; 13] = [
        "count", "mean", "std", "min", "max", "p1", "p5", "p25", "p50", "p75", "p95", "p99", "l1_mean",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.count as f64,
            self.mean,
            self.std,
            self.min,
            self.max,
            self.p1,
            self.p5,
            self.p25,
            self.p50,
            self.p75,
            self.p95,
            self.p99,
            self.l1_mean,
        ]
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance, two-pass.
fn variance(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64
}

fn non_empty(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyInput(what.into()));
    }
    Ok(())
}

/// Percentile `q` in `[0, 100]` of sorted data, interpolating linearly
/// between the order statistics at ranks `⌊h⌋` and `⌈h⌉`, `h = (n−1)·q/100`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    (sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])).clamp(sorted[lo], sorted[hi])
}

pub fn descriptive_stats(values: &[f64]) -> Result<StatsSummary> {
    non_empty(values, "descriptive statistics of an empty sequence")?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = mean(values);
    let p = PERCENTILES.map(|q| percentile_sorted(&sorted, q));
    Ok(StatsSummary {
        count: values.len(),
        mean: m,
        std: variance(values, m).sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        p1: p[0],
        p5: p[1],
        p25: p[2],
        p50: p[3],
        p75: p[4],
        p95: p[5],
        p99: p[6],
        l1_mean: values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64,
    })
}

/// `(μ_blob − μ_bg)² / (σ²_blob + σ²_bg)` with population variances.
pub fn fisher_cnr(blob: &[f64], bg: &[f64]) -> Result<f64> {
    non_empty(blob, "fisher_cnr: empty blob region")?;
    non_empty(bg, "fisher_cnr: empty background region")?;
    let (mb, mg) = (mean(blob), mean(bg));
    let denom = variance(blob, mb) + variance(bg, mg);
    let num = (mb - mg) * (mb - mg);
    if denom == 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Degenerate("fisher_cnr: both regions have zero variance".into()));
    }
    Ok(num / denom)
}

/// Mean absolute value inside the blob over mean absolute value outside.
pub fn l1_ratio(blob: &[f64], bg: &[f64]) -> Result<f64> {
    non_empty(blob, "l1_ratio: empty blob region")?;
    non_empty(bg, "l1_ratio: empty background region")?;
    let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    let b = l1(bg);
    if b == 0.0 {
        return Err(Error::Degenerate("l1_ratio: background L1 mean is zero".into()));
    }
    Ok(l1(blob) / b)
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation `cov / sqrt(var_x · var_y)`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("lengths {} and {}", x.len(), y.len())));
    }
    non_empty(x, "pearson of empty sequences")?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation with a constant sequence".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::EmptyInput(format!("spearman needs at least 3 pairs, got {}", x.len())));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub out_of_range: usize,
}

/// Uniform bins over `range` or the data's `[min, max]`; the last bin is
/// closed on the right. A degenerate data range is widened to `v ± 0.5`.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    non_empty(values, "histogram of an empty sequence")?;
    if bins < 1 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) if hi > lo => (lo, hi),
        Some((lo, hi)) => return Err(Error::InvalidParameter(format!("empty histogram range [{lo}, {hi}]"))),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0; bins];
    let mut out_of_range = 0;
    for &v in values {
        if !(lo..=hi).contains(&v) {
            out_of_range += 1;
            continue;
        }
        let mut b = (((v - lo) / width) as usize).min(bins - 1);
        // keep bin membership consistent with the published edges
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts, out_of_range })
}

/// Blob statistics of one attribution map around its POI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionMetrics {
    pub blob_count: usize,
    pub distances: Vec<f64>,
    pub nearest_blob_distance: Option<f64>,
    pub fisher_cnr: Option<f64>,
    pub l1_ratio: Option<f64>,
    pub global: StatsSummary,
    /// Inside the blob mask; present iff there is at least one blob.
    pub local: Option<StatsSummary>,
    /// Mean attribution per blob, in blob order.
    pub blob_means: Vec<f64>,
}

/// Splits `attr` by the blob mask and summarizes both sides. CNR and L1
/// ratio are missing when there are no blobs or they are undefined.
pub fn attribution_metrics(attr: &Volume<f32>, blobs: &BlobSet, poi: Voxel) -> Result<AttributionMetrics> {
    if attr.dims() != blobs.label_field.dims() {
        return Err(Error::DimensionMismatch("attribution map and blob labels differ in size".into()));
    }
    let all: Vec<f64> = attr.data().iter().map(|&v| v as f64).collect();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut sums = vec![0.0; blobs.len()];
    for (&v, &l) in all.iter().zip(blobs.label_field.data()) {
        if l == 0 {
            outside.push(v);
        } else {
            inside.push(v);
            sums[l as usize - 1] += v;
        }
    }
    let distances = blob_poi_distances(blobs, poi);
    let nearest = distances.iter().copied().reduce(f64::min);
    let has_blobs = !blobs.is_empty() && !outside.is_empty();
    Ok(AttributionMetrics {
        blob_count: blobs.len(),
        nearest_blob_distance: nearest,
        fisher_cnr: if has_blobs { fisher_cnr(&inside, &outside).ok() } else { None },
        l1_ratio: if has_blobs { l1_ratio(&inside, &outside).ok() } else { None },
        global: descriptive_stats(&all)?,
        local: if blobs.is_empty() { None } else { Some(descriptive_stats(&inside)?) },
        blob_means: sums.iter().zip(&blobs.blobs).map(|(s, b)| s / b.size as f64).collect(),
        distances,
    })
}
