//! Overlapping cubic patch grid.
//!
//! Per axis, patch starts are multiples of `stride = round((1 - overlap) * P)`
//! followed by one clamped start at `dim - P` when the regular starts do not
//! reach the far border. Overlap is applied per axis, so an interior voxel
//! belongs to at most 8 patches when `overlap < 0.5`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume, Voxel};

pub const DEFAULT_PATCH_SIZE: usize = 64;
pub const DEFAULT_OVERLAP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatchIndex {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
}

impl PatchIndex {
    pub const fn new(ix: usize, iy: usize, iz: usize) -> Self {
        PatchIndex { ix, iy, iz }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.ix, self.iy, self.iz]
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut it = s.split('_').map(|p| p.parse::<usize>().ok());
        let idx = PatchIndex::new(it.next()??, it.next()??, it.next()??);
        it.next().is_none().then_some(idx)
    }
}

/// Renders as `ix_iy_iz`, the form used in file names and tables.
impl fmt::Display for PatchIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.ix, self.iy, self.iz)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    volume_dims: Dims,
    patch_size: usize,
    stride: usize,
    starts: [Vec<usize>; 3],
}

impl PatchGrid {
    pub fn new(dims: Dims, patch_size: usize, overlap_fraction: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&overlap_fraction) {
            return Err(Error::InvalidGrid(format!(
                "overlap fraction {overlap_fraction} outside [0, 0.5)"
            )));
        }
        let stride = ((1.0 - overlap_fraction) * patch_size as f64).round() as usize;
        Self::with_stride(dims, patch_size, stride)
    }

    pub fn with_stride(dims: Dims, patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 || stride == 0 {
            return Err(Error::InvalidGrid(format!(
                "patch size {patch_size} and stride {stride} must be positive"
            )));
        }
        if stride > patch_size {
            return Err(Error::InvalidGrid(format!(
                "stride {stride} larger than patch size {patch_size} leaves gaps"
            )));
        }
        let dims_arr = dims.as_array();
        if let Some(&d) = dims_arr.iter().find(|&&d| d < patch_size) {
            return Err(Error::InvalidGrid(format!(
                "patch size {patch_size} larger than volume dimension {d}"
            )));
        }
        let axis = |dim: usize| {
            let mut starts: Vec<usize> = (0..)
                .map(|k| k * stride)
                .take_while(|s| s + patch_size <= dim)
                .collect();
            let last = *starts.last().expect("dim >= patch_size");
            if last + patch_size < dim {
                starts.push(dim - patch_size);
                // a clamped start too close to the last regular one would put
                // voxels in three patches along this axis; it replaces it
                let n = starts.len();
                if n >= 3 && starts[n - 1] < starts[n - 3] + patch_size {
                    starts.remove(n - 2);
                }
            }
            starts
        };
        Ok(PatchGrid {
            volume_dims: dims,
            patch_size,
            stride,
            starts: [axis(dims.nx), axis(dims.ny), axis(dims.nz)],
        })
    }

    pub fn volume_dims(&self) -> Dims {
        self.volume_dims
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn patch_dims(&self) -> Dims {
        Dims::cube(self.patch_size)
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn starts(&self, axis: usize) -> &[usize] {
        &self.starts[axis]
    }

    pub fn len(&self) -> usize {
        self.starts.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All patch indices in (ix, iy, iz) lexicographic order.
    pub fn indices(&self) -> impl Iterator<Item = PatchIndex> + '_ {
        let [sx, sy, sz] = &self.starts;
        (0..sx.len()).flat_map(move |ix| {
            (0..sy.len()).flat_map(move |iy| (0..sz.len()).map(move |iz| PatchIndex::new(ix, iy, iz)))
        })
    }

    pub fn check(&self, idx: PatchIndex) -> Result<()> {
        let ok = idx
            .as_array()
            .iter()
            .zip(&self.starts)
            .all(|(&i, s)| i < s.len());
        if ok {
            Ok(())
        } else {
            Err(Error::PatchIndexOutOfRange(idx.to_string()))
        }
    }

    pub fn origin(&self, idx: PatchIndex) -> Result<Voxel> {
        self.check(idx)?;
        Ok([
            self.starts[0][idx.ix],
            self.starts[1][idx.iy],
            self.starts[2][idx.iz],
        ])
    }

    pub fn contains(&self, idx: PatchIndex, p: Voxel) -> bool {
        match self.origin(idx) {
            Ok(o) => (0..3).all(|a| p[a] >= o[a] && p[a] < o[a] + self.patch_size),
            Err(_) => false,
        }
    }

    /// Global coordinate to patch-local coordinate.
    pub fn to_local(&self, idx: PatchIndex, p: Voxel) -> Result<Voxel> {
        let o = self.origin(idx)?;
        if !self.contains(idx, p) {
            return Err(Error::OutOfBounds {
                coord: p,
                dims: self.volume_dims.as_array(),
            });
        }
        Ok([p[0] - o[0], p[1] - o[1], p[2] - o[2]])
    }

    /// Every patch whose box contains `p`, in lexicographic index order.
    pub fn patches_containing(&self, p: Voxel) -> Result<Vec<PatchIndex>> {
        self.volume_dims.check(p)?;
        let per_axis: Vec<Vec<usize>> = (0..3)
            .map(|a| {
                self.starts[a]
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s <= p[a] && p[a] < s + self.patch_size)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        for &ix in &per_axis[0] {
            for &iy in &per_axis[1] {
                for &iz in &per_axis[2] {
                    out.push(PatchIndex::new(ix, iy, iz));
                }
            }
        }
        Ok(out)
    }

    /// Distance from a local coordinate to the nearest patch face.
    pub fn border_distance(&self, local: Voxel) -> usize {
        local
            .iter()
            .map(|&c| c.min(self.patch_size - 1 - c))
            .min()
            .unwrap_or(0)
    }

    pub fn extract<T: Copy>(&self, v: &Volume<T>, idx: PatchIndex) -> Result<Volume<T>> {
        if v.dims() != self.volume_dims {
            return Err(Error::DimensionMismatch(format!(
                "grid built for {:?}, volume is {:?}",
                self.volume_dims.as_array(),
                v.dims().as_array()
            )));
        }
        v.crop(self.origin(idx)?, self.patch_dims())
    }
}

pub fn build_patch_grid(dims: Dims, patch_size: usize, overlap_fraction: f64) -> Result<PatchGrid> {
    PatchGrid::new(dims, patch_size, overlap_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VolumeKind;
    use proptest::prelude::*;

    #[test]
    fn starts_160_p64() {
        let g = build_patch_grid(Dims::cube(160), 64, 0.25).unwrap();
        assert_eq!(g.stride(), 48);
        for a in 0..3 {
            assert_eq!(g.starts(a), &[0, 48, 96]);
        }
        assert_eq!(g.len(), 27);
    }

    #[test]
    fn single_patch() {
        let g = build_patch_grid(Dims::cube(64), 64, 0.25).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.origin(PatchIndex::new(0, 0, 0)).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn clamped_final_start() {
        let g = build_patch_grid(Dims::cube(100), 64, 0.25).unwrap();
        assert_eq!(g.starts(0), &[0, 36]);
    }

    #[test]
    fn patch_larger_than_volume() {
        assert!(matches!(
            build_patch_grid(Dims::new(64, 63, 64), 64, 0.25),
            Err(Error::InvalidGrid(_))
        ));
        assert!(build_patch_grid(Dims::cube(64), 32, 0.5).is_err());
    }

    #[test]
    fn membership_counts() {
        let g = build_patch_grid(Dims::cube(160), 64, 0.25).unwrap();
        assert_eq!(g.patches_containing([0, 0, 0]).unwrap().len(), 1);
        assert_eq!(g.patches_containing([50, 50, 50]).unwrap().len(), 8);
        assert_eq!(g.patches_containing([50, 0, 0]).unwrap().len(), 2);
        assert!(g.patches_containing([160, 0, 0]).is_err());
    }

    #[test]
    fn extract_full_and_corner() {
        let v = Volume::from_fn(Dims::cube(8), VolumeKind::Intensity, |[x, y, z]| (x + 8 * y + 64 * z) as f32);
        let g = build_patch_grid(Dims::cube(8), 8, 0.25).unwrap();
        assert_eq!(g.extract(&v, PatchIndex::new(0, 0, 0)).unwrap(), v);
        let c = Volume::filled(Dims::cube(12), 3u8, VolumeKind::Intensity);
        let g = build_patch_grid(Dims::cube(12), 8, 0.25).unwrap();
        let p = g.extract(&c, PatchIndex::new(1, 0, 1)).unwrap();
        assert!(p.data().iter().all(|&x| x == 3));
        assert!(g.extract(&c, PatchIndex::new(2, 0, 0)).is_err());
    }

    #[test]
    fn patch_index_text() {
        let i = PatchIndex::new(1, 20, 3);
        assert_eq!(i.to_string(), "1_20_3");
        assert_eq!(PatchIndex::parse("1_20_3"), Some(i));
        assert_eq!(PatchIndex::parse("1_2"), None);
        assert_eq!(PatchIndex::parse("1_2_3_4"), None);
    }

    proptest! {
        #[test]
        fn coverage_and_bound(
            nx in 8usize..80, ny in 8usize..80, nz in 8usize..80,
            p in 4usize..9, overlap in 0.0f64..0.49,
            fx in 0.0f64..1.0, fy in 0.0f64..1.0, fz in 0.0f64..1.0,
        ) {
            let dims = Dims::new(nx, ny, nz);
            let g = build_patch_grid(dims, p, overlap).unwrap();
            for a in 0..3 {
                let s = g.starts(a);
                prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(s[0], 0);
                prop_assert_eq!(s.last().unwrap() + p, dims.as_array()[a]);
            }
            let q = [
                ((nx - 1) as f64 * fx) as usize,
                ((ny - 1) as f64 * fy) as usize,
                ((nz - 1) as f64 * fz) as usize,
            ];
            let hits = g.patches_containing(q).unwrap();
            prop_assert!(!hits.is_empty() && hits.len() <= 8);
            for h in g.indices() {
                prop_assert_eq!(hits.contains(&h), g.contains(h, q));
            }
        }

        #[test]
        fn extract_matches_offsets(seed in any::<u64>(), qx in 0usize..6, qy in 0usize..6, qz in 0usize..6) {
            let dims = Dims::new(17, 13, 11);
            let v = Volume::from_fn(dims, VolumeKind::Intensity, |p| {
                (dims.index(p) as u64).wrapping_mul(seed | 1) as u32
            });
            let g = build_patch_grid(dims, 6, 0.25).unwrap();
            for idx in g.indices() {
                let patch = g.extract(&v, idx).unwrap();
                let o = g.origin(idx).unwrap();
                prop_assert_eq!(patch.get([qx, qy, qz]), v.get([o[0] + qx, o[1] + qy, o[2] + qz]));
            }
        }
    }
}
