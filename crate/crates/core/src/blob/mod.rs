//! Blob detection on attribution maps: multiscale Frangi response, Otsu
//! threshold, connected components, small-component removal.

mod otsu;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{multiscale_frangi, FrangiParams};
use crate::neighborhood::{label, Labeling};
use crate::volume::{Dims, Mask, Volume, VolumeKind, Voxel};

pub use crate::neighborhood::Connectivity;
pub use otsu::otsu_threshold;

/// Which side of the signed attribution is searched for blobs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionSign {
    #[default]
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobDetectorParams {
    pub frangi: FrangiParams,
    pub otsu_bins: usize,
    pub min_component_size: usize,
    pub connectivity: Connectivity,
    pub sign: AttributionSign,
}

impl Default for BlobDetectorParams {
    fn default() -> Self {
        BlobDetectorParams {
            frangi: FrangiParams::default(),
            otsu_bins: 256,
            min_component_size: 5,
            connectivity: Connectivity::TwentySix,
            sign: AttributionSign::Positive,
        }
    }
}

impl BlobDetectorParams {
    pub fn validate(&self) -> Result<()> {
        self.frangi.validate()?;
        if self.otsu_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "detector.otsu_bins must be >= 2, got {}",
                self.otsu_bins
            )));
        }
        if self.min_component_size < 1 {
            return Err(Error::InvalidParameter("detector.min_component_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub label: u32,
    pub size: usize,
    pub centroid: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlobSet {
    /// 0 for background, `1..=K` for blobs.
    pub label_field: Volume<u32>,
    pub blobs: Vec<Blob>,
    /// Otsu threshold on the response; `None` when the response was flat.
    pub threshold: Option<f64>,
}

impl BlobSet {
    pub fn empty(dims: Dims) -> Self {
        BlobSet {
            label_field: Volume::filled(dims, 0, VolumeKind::Intensity),
            blobs: Vec::new(),
            threshold: None,
        }
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn mask(&self) -> Mask {
        self.label_field.map(VolumeKind::BinaryMask, |l| (l != 0) as u8)
    }

    fn from_labeling(l: &Labeling, threshold: Option<f64>) -> Self {
        let label_field =
            Volume::from_vec(l.dims, l.labels.clone(), VolumeKind::Intensity).expect("labeling matches dims");
        BlobSet {
            label_field,
            blobs: l
                .components
                .iter()
                .map(|c| Blob {
                    label: c.label,
                    size: c.size,
                    centroid: c.centroid,
                })
                .collect(),
            threshold,
        }
    }
}

/// Connected components of a binary mask, labeled by first voxel in scan order.
pub fn label_components(mask: &Mask, connectivity: Connectivity) -> BlobSet {
    BlobSet::from_labeling(&label(mask, connectivity), None)
}

/// The signed map the detector filters: `attr` or `-attr`.
pub fn select_sign(attr: &Volume<f32>, sign: AttributionSign) -> Volume<f32> {
    match sign {
        AttributionSign::Positive => attr.clone(),
        AttributionSign::Negative => attr.negated(),
    }
}

/// Multiscale Frangi response of the selected attribution side.
pub fn blob_response(attr: &Volume<f32>, p: &BlobDetectorParams) -> Result<Volume<f32>> {
    multiscale_frangi(&select_sign(attr, p.sign), &p.frangi)
}

/// Thresholded and labeled response, before small-component removal.
/// Returns `None` when Otsu has nothing to separate.
pub fn threshold_and_label(response: &Volume<f32>, p: &BlobDetectorParams) -> Result<Option<(f64, Labeling)>> {
    let threshold = match otsu_threshold(response.data(), p.otsu_bins) {
        Ok(t) => t,
        Err(Error::Degenerate(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mask = response.map(VolumeKind::BinaryMask, |r| (r as f64 > threshold) as u8);
    Ok(Some((threshold, label(&mask, p.connectivity))))
}

pub fn blobs_from_labeling(dims: Dims, labeled: Option<&(f64, Labeling)>, min_component_size: usize) -> BlobSet {
    match labeled {
        None => BlobSet::empty(dims),
        Some((t, l)) => BlobSet::from_labeling(&l.filter_min_size(min_component_size), Some(*t)),
    }
}

/// Full detector: sign selection, multiscale Frangi, Otsu, strict
/// binarization, labeling, removal of components below
/// `min_component_size`. A flat response yields an empty set.
pub fn detect_blobs(attr: &Volume<f32>, p: &BlobDetectorParams) -> Result<BlobSet> {
    p.validate()?;
    let response = blob_response(attr, p)?;
    let labeled = threshold_and_label(&response, p)?;
    Ok(blobs_from_labeling(attr.dims(), labeled.as_ref(), p.min_component_size))
}

/// Euclidean distance from each blob centroid to `poi`, in blob order.
pub fn blob_poi_distances(blobs: &BlobSet, poi: Voxel) -> Vec<f64> {
    blobs
        .blobs
        .iter()
        .map(|b| {
            (0..3)
                .map(|a| (b.centroid[a] - poi[a] as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}
