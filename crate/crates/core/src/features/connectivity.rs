//! Relative connectivity: skeleton branches leaving the exclusion sphere.

use std::collections::VecDeque;

use super::exclusion::ExclusionMask;
use crate::error::{Error, Result};
use crate::neighborhood::OFFSETS_26;
use crate::volume::{Mask, Voxel};

/// Skeleton voxels matched to a POI are searched up to this distance.
pub const SKELETON_SEARCH_RADIUS: usize = 2;

/// The skeleton voxel at `poi`, else the closest one within
/// `SKELETON_SEARCH_RADIUS` (distance, then linear index).
pub fn nearest_skeleton_voxel(skeleton: &Mask, poi: Voxel) -> Result<Voxel> {
    let dims = skeleton.dims();
    dims.check(poi)?;
    let r = SKELETON_SEARCH_RADIUS as isize;
    let mut best: Option<(isize, usize, Voxel)> = None;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 > r * r {
                    continue;
                }
                let Some(q) = dims.offset(poi, [dx, dy, dz]) else { continue };
                if skeleton.is_set(q) {
                    let key = (d2, dims.index(q), q);
                    if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                        best = Some(key);
                    }
                }
            }
        }
    }
    best.map(|b| b.2).ok_or(Error::NoSkeletonNearby {
        poi,
        radius: SKELETON_SEARCH_RADIUS,
    })
}

/// 26-connected flood fill over `allowed` from `seed`, marking `seen`.
fn flood(allowed: &dyn Fn(Voxel) -> bool, seed: Voxel, seen: &mut [bool], skeleton: &Mask, out: &mut Vec<Voxel>) {
    let dims = skeleton.dims();
    let mut queue = VecDeque::from([seed]);
    seen[dims.index(seed)] = true;
    while let Some(p) = queue.pop_front() {
        out.push(p);
        for &d in OFFSETS_26.iter() {
            if let Some(q) = dims.offset(p, d) {
                let i = dims.index(q);
                if !seen[i] && allowed(q) {
                    seen[i] = true;
                    queue.push_back(q);
                }
            }
        }
    }
}

/// Number of 26-connected pieces of the POI's skeleton component that
/// remain after removing the exclusion sphere.
pub fn relative_connectivity(skeleton: &Mask, excl: &ExclusionMask, poi: Voxel) -> Result<usize> {
    let seed = nearest_skeleton_voxel(skeleton, poi)?;
    let dims = skeleton.dims();
    let mut seen = vec![false; dims.len()];
    let mut component = Vec::new();
    flood(&|q| skeleton.is_set(q), seed, &mut seen, skeleton, &mut component);

    let mut inside = vec![false; dims.len()];
    for &q in &component {
        inside[dims.index(q)] = !excl.contains(q);
    }
    let mut seen = vec![false; dims.len()];
    let mut scratch = Vec::new();
    let mut pieces = 0;
    for &q in &component {
        let i = dims.index(q);
        if inside[i] && !seen[i] {
            pieces += 1;
            scratch.clear();
            flood(&|v| inside[dims.index(v)], q, &mut seen, skeleton, &mut scratch);
        }
    }
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::exclusion::exclusion_mask;
    use crate::graph::skeletonize;
    use crate::volume::{Dims, VolumeKind};

    fn line(dims: Dims, from: Voxel, dir: [isize; 3], len: usize, m: &mut Mask) {
        let mut p = from;
        for _ in 0..len {
            m.set(p, 1);
            match dims.offset(p, dir) {
                Some(q) => p = q,
                None => break,
            }
        }
    }

    #[test]
    fn straight_line_midpoint() {
        let dims = Dims::cube(32);
        let mut m = Mask::empty(dims);
        line(dims, [2, 16, 16], [1, 0, 0], 28, &mut m);
        let e = exclusion_mask(&m, [16, 16, 16]).unwrap();
        assert_eq!(relative_connectivity(&m, &e, [16, 16, 16]).unwrap(), 2);
        // without exclusion the skeleton stays in one piece
        let none = ExclusionMask::with_radius(dims, [16, 16, 16], 0);
        assert_eq!(relative_connectivity(&m, &none, [16, 16, 16]).unwrap(), 1);
    }

    #[test]
    fn y_junction_center() {
        let dims = Dims::cube(40);
        let mut m = Mask::empty(dims);
        let c = [20, 20, 20];
        for dir in [[1, 0, 0], [-1, 1, 0], [-1, -1, 0]] {
            line(dims, c, dir, 15, &mut m);
        }
        let e = exclusion_mask(&m, c).unwrap();
        assert_eq!(relative_connectivity(&m, &e, c).unwrap(), 3);
    }

    #[test]
    fn stub_inside_sphere() {
        let dims = Dims::cube(16);
        let mut m = Mask::empty(dims);
        line(dims, [8, 8, 8], [1, 0, 0], 2, &mut m);
        let e = exclusion_mask(&m, [8, 8, 8]).unwrap();
        assert_eq!(relative_connectivity(&m, &e, [8, 8, 8]).unwrap(), 0);
    }

    #[test]
    fn other_components_ignored() {
        let dims = Dims::cube(32);
        let mut m = Mask::empty(dims);
        line(dims, [2, 8, 8], [1, 0, 0], 28, &mut m);
        line(dims, [2, 24, 24], [1, 0, 0], 28, &mut m);
        let e = exclusion_mask(&m, [16, 8, 8]).unwrap();
        assert_eq!(relative_connectivity(&m, &e, [16, 8, 8]).unwrap(), 2);
    }

    #[test]
    fn off_skeleton_poi_matched_within_two() {
        let dims = Dims::cube(32);
        let tube = Mask::from_fn(dims, VolumeKind::BinaryMask, |[x, y, z]| {
            ((2..30).contains(&x) && (y as f64 - 16.0).powi(2) + (z as f64 - 16.0).powi(2) <= 4.0) as u8
        });
        let skel = skeletonize(&tube);
        let poi = [16, 17, 16];
        let e = exclusion_mask(&tube, poi).unwrap();
        assert_eq!(relative_connectivity(&skel, &e, poi).unwrap(), 2);
        assert!(matches!(
            relative_connectivity(&skel, &e, [16, 16, 26]),
            Err(Error::NoSkeletonNearby { .. })
        ));
    }
}
