//! Patch-relative vessel features at POIs: thickness, tubularity,
//! relative connectivity and patch component summaries.

mod connectivity;
mod edt;
mod exclusion;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{skeletonize, PredictionStatus};
use crate::neighborhood::{label, Connectivity, Labeling};
use crate::patch::PatchIndex;
use crate::volume::{Mask, Volume, Voxel};

pub use connectivity::{nearest_skeleton_voxel, relative_connectivity, SKELETON_SEARCH_RADIUS};
pub use edt::{edt, squared_edt, thickness_at};
pub use exclusion::{exclusion_mask, shell_counts, ExclusionMask, MAX_RADIUS, MIN_RADIUS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchVesselSummary {
    pub component_count: usize,
    pub total_volume: usize,
    pub poi_component_volume: usize,
}

/// Foreground component count, foreground volume and the volume of the
/// component holding `poi` (0 when `poi` is background).
pub fn patch_vessel_summary(gt_patch: &Mask, poi: Voxel) -> Result<PatchVesselSummary> {
    gt_patch.dims().check(poi)?;
    Ok(summary_from_labeling(&label(gt_patch, Connectivity::TwentySix), poi))
}

fn summary_from_labeling(l: &Labeling, poi: Voxel) -> PatchVesselSummary {
    let at = l.label_at(poi);
    PatchVesselSummary {
        component_count: l.len(),
        total_volume: l.components.iter().map(|c| c.size).sum(),
        poi_component_volume: if at == 0 { 0 } else { l.components[at as usize - 1].size },
    }
}

/// One row of the feature table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VesselFeatureRecord {
    pub poi_id: usize,
    pub patch: PatchIndex,
    pub status: PredictionStatus,
    /// Missing when the POI is background in the patch.
    pub thickness: Option<f64>,
    pub tubularity: f64,
    /// Missing when no skeleton voxel lies near the POI.
    pub relative_connectivity: Option<usize>,
    pub patch_component_count: usize,
    pub patch_vessel_volume: usize,
    pub poi_component_volume: usize,
    pub border_distance: usize,
}

/// Per-patch derived volumes, computed once and shared by every POI in
/// the patch.
pub struct PatchFeatureContext {
    pub gt: Mask,
    pub skeleton: Mask,
    pub distance: Volume<f64>,
    pub tubularity: Volume<f32>,
    labeling: Labeling,
}

impl PatchFeatureContext {
    pub fn new(gt: Mask, tubularity: Volume<f32>) -> Self {
        PatchFeatureContext {
            skeleton: skeletonize(&gt),
            distance: edt(&gt),
            labeling: label(&gt, Connectivity::TwentySix),
            gt,
            tubularity,
        }
    }

    /// Features of the POI at patch-local coordinate `local`.
    pub fn record(
        &self,
        poi_id: usize,
        patch: PatchIndex,
        status: PredictionStatus,
        local: Voxel,
        border_distance: usize,
    ) -> Result<VesselFeatureRecord> {
        self.gt.dims().check(local)?;
        let summary = summary_from_labeling(&self.labeling, local);
        let (thickness, relative) = if self.gt.is_set(local) {
            let excl = exclusion_mask(&self.gt, local)?;
            (
                Some(thickness_at(&self.distance, local)?),
                relative_connectivity(&self.skeleton, &excl, local).ok(),
            )
        } else {
            (None, None)
        };
        Ok(VesselFeatureRecord {
            poi_id,
            patch,
            status,
            thickness,
            tubularity: self.tubularity.get(local) as f64,
            relative_connectivity: relative,
            patch_component_count: summary.component_count,
            patch_vessel_volume: summary.total_volume,
            poi_component_volume: summary.poi_component_volume,
            border_distance,
        })
    }
}
