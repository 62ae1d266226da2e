//! File naming contract shared with attribution exporters:
//! `attr_<poi_id>_<ix>_<iy>_<iz>.nii` and `pred_<ix>_<iy>_<iz>.nii`.

use crate::patch::PatchIndex;

pub fn attribution_stem(poi_id: usize, patch: PatchIndex) -> String {
    format!("attr_{poi_id}_{patch}")
}

pub fn attribution_file_name(poi_id: usize, patch: PatchIndex) -> String {
    format!("{}.nii", attribution_stem(poi_id, patch))
}

pub fn prediction_file_name(patch: PatchIndex) -> String {
    format!("pred_{patch}.nii")
}

fn parse_indices<const N: usize>(rest: &str) -> Option<[usize; N]> {
    let parts: Vec<usize> = rest
        .split('_')
        .map(|p| {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            p.parse().ok()
        })
        .collect::<Option<_>>()?;
    parts.try_into().ok()
}

/// Inverse of [`attribution_file_name`]; also accepts `.nii.gz`.
pub fn parse_attribution_file_name(name: &str) -> Option<(usize, PatchIndex)> {
    let stem = name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii"))?;
    let [poi, ix, iy, iz] = parse_indices::<4>(stem.strip_prefix("attr_")?)?;
    Some((poi, PatchIndex::new(ix, iy, iz)))
}

pub fn parse_prediction_file_name(name: &str) -> Option<PatchIndex> {
    let stem = name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii"))?;
    let [ix, iy, iz] = parse_indices::<3>(stem.strip_prefix("pred_")?)?;
    Some(PatchIndex::new(ix, iy, iz))
}
