//! Sphere-expansion exclusion mask around a POI.

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask, VolumeKind, Voxel};

pub const MIN_RADIUS: usize = 2;
pub const MAX_RADIUS: usize = 10;

/// Ball `{q : ‖q − center‖ ≤ radius}` clipped to the patch. A radius of 0
/// excludes nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExclusionMask {
    pub center: Voxel,
    pub radius: usize,
    pub dims: Dims,
}

impl ExclusionMask {
    pub fn with_radius(dims: Dims, center: Voxel, radius: usize) -> Self {
        ExclusionMask { center, radius, dims }
    }

    pub fn contains(&self, q: Voxel) -> bool {
        self.radius > 0 && self.dims.contains(q) && dist2(q, self.center) <= (self.radius * self.radius) as i64
    }

    pub fn mask(&self) -> Mask {
        Mask::from_fn(self.dims, VolumeKind::BinaryMask, |q| self.contains(q) as u8)
    }
}

fn dist2(a: Voxel, b: Voxel) -> i64 {
    (0..3).map(|k| (a[k] as i64 - b[k] as i64).pow(2)).sum()
}

/// Per-shell vessel and background counts `(NV, NB)` for radii
/// `MIN_RADIUS..=MAX_RADIUS`. The first shell is the whole ball of radius
/// `MIN_RADIUS`; later shells cover `r − 1 < ‖q − poi‖ ≤ r`.
pub fn shell_counts(gt_patch: &Mask, poi: Voxel) -> Vec<(usize, usize)> {
    let dims = gt_patch.dims();
    let mut counts = vec![(0usize, 0usize); MAX_RADIUS - MIN_RADIUS + 1];
    let r = MAX_RADIUS as isize;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy + dz * dz) as usize;
                if d2 > MAX_RADIUS * MAX_RADIUS {
                    continue;
                }
                let Some(q) = dims.offset(poi, [dx, dy, dz]) else { continue };
                // smallest radius whose ball holds q
                let shell = (MIN_RADIUS..=MAX_RADIUS).find(|&s| d2 <= s * s).unwrap() - MIN_RADIUS;
                if gt_patch.is_set(q) {
                    counts[shell].0 += 1;
                } else {
                    counts[shell].1 += 1;
                }
            }
        }
    }
    counts
}

/// Grows the sphere from radius 2 to 10 and stops at the first shell where
/// new background exceeds 0.75 × new vessel voxels, or where the shell
/// holds no vessel at all. Never triggering gives radius 10.
pub fn exclusion_mask(gt_patch: &Mask, poi: Voxel) -> Result<ExclusionMask> {
    gt_patch.dims().check(poi)?;
    if !gt_patch.is_set(poi) {
        return Err(Error::Background(poi));
    }
    let radius = shell_counts(gt_patch, poi)
        .iter()
        .position(|&(nv, nb)| nv == 0 || 4 * nb > 3 * nv)
        .map_or(MAX_RADIUS, |i| i + MIN_RADIUS);
    Ok(ExclusionMask::with_radius(gt_patch.dims(), poi, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thin_line_stops_at_two() {
        let dims = Dims::cube(24);
        let m = Mask::from_fn(dims, VolumeKind::BinaryMask, |[_, y, z]| (y == 12 && z == 12) as u8);
        let e = exclusion_mask(&m, [12, 12, 12]).unwrap();
        assert_eq!(e.radius, 2);
        // ball of radius 2 holds 33 voxels, 5 of them on the line
        assert_eq!(shell_counts(&m, [12, 12, 12])[0], (5, 28));
    }

    #[test]
    fn full_patch_reaches_max() {
        let m = Mask::filled(Dims::cube(32), 1, VolumeKind::BinaryMask);
        assert_eq!(exclusion_mask(&m, [16, 16, 16]).unwrap().radius, 10);
    }

    #[test]
    fn solid_sphere_grows() {
        let dims = Dims::cube(32);
        let m = Mask::from_fn(dims, VolumeKind::BinaryMask, |q| (dist2(q, [16, 16, 16]) <= 64) as u8);
        let e = exclusion_mask(&m, [16, 16, 16]).unwrap();
        // shells up to 8 are all vessel, shell 9 is all background
        assert_eq!(e.radius, 9);
        let counts = shell_counts(&m, [16, 16, 16]);
        assert!(counts[..7].iter().all(|&(_, nb)| nb == 0));
    }

    #[test]
    fn background_poi_rejected() {
        let m = Mask::empty(Dims::cube(8));
        assert!(matches!(exclusion_mask(&m, [1, 1, 1]), Err(Error::Background(_))));
        assert!(exclusion_mask(&m, [9, 1, 1]).is_err());
    }

    #[test]
    fn mask_matches_ball_clipped() {
        let e = ExclusionMask::with_radius(Dims::cube(6), [0, 0, 0], 2);
        let m = e.mask();
        assert!(m.is_set([2, 0, 0]) && m.is_set([1, 1, 1]) && !m.is_set([2, 1, 0]));
        // one octant of the radius-2 ball
        assert_eq!(m.count(), 11);
        assert_eq!(ExclusionMask::with_radius(Dims::cube(6), [3, 3, 3], 0).mask().count(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn radius_monotone_under_dilation(r in 0.5f64..4.0, extra in 0.5f64..3.0, off in 0usize..3) {
            let dims = Dims::cube(28);
            let tube = |rad: f64| Mask::from_fn(dims, VolumeKind::BinaryMask, move |[_, y, z]| {
                ((y as f64 - 14.0).powi(2) + (z as f64 - 14.0).powi(2) <= rad * rad) as u8
            });
            let poi = [14, 14 + off.min(r as usize), 14];
            let a = exclusion_mask(&tube(r), poi).unwrap().radius;
            let b = exclusion_mask(&tube(r + extra), poi).unwrap().radius;
            prop_assert!(b >= a, "{a} -> {b}");
        }
    }
}
