//! Dense 3D scalar grids.
//!
//! Voxels are stored x-fastest: `index = x + nx * (y + ny * z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer voxel coordinate `[x, y, z]`.
pub type Voxel = [usize; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Dims { nx: n, ny: n, nz: n }
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn from_array(a: [usize; 3]) -> Self {
        Dims::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn contains(&self, p: Voxel) -> bool {
        p[0] < self.nx && p[1] < self.ny && p[2] < self.nz
    }

    #[inline]
    pub fn index(&self, p: Voxel) -> usize {
        p[0] + self.nx * (p[1] + self.ny * p[2])
    }

    #[inline]
    pub fn coord(&self, index: usize) -> Voxel {
        let x = index % self.nx;
        let rest = index / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    /// Signed offset lookup; `None` when the neighbor falls outside.
    #[inline]
    pub fn offset(&self, p: Voxel, d: [isize; 3]) -> Option<Voxel> {
        let x = p[0].checked_add_signed(d[0])?;
        let y = p[1].checked_add_signed(d[1])?;
        let z = p[2].checked_add_signed(d[2])?;
        let q = [x, y, z];
        self.contains(q).then_some(q)
    }

    pub fn check(&self, p: Voxel) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                coord: p,
                dims: self.as_array(),
            })
        }
    }
}

/// What a volume's values mean. Carried through I/O but not used for
/// dispatch inside the algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeKind {
    Intensity,
    BinaryMask,
    Attribution,
    Response,
}

impl VolumeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VolumeKind::Intensity => "intensity",
            VolumeKind::BinaryMask => "binary-mask",
            VolumeKind::Attribution => "attribution",
            VolumeKind::Response => "response",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "intensity" => Some(VolumeKind::Intensity),
            "binary-mask" => Some(VolumeKind::BinaryMask),
            "attribution" => Some(VolumeKind::Attribution),
            "response" => Some(VolumeKind::Response),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    dims: Dims,
    spacing: [f64; 3],
    kind: VolumeKind,
    data: Vec<T>,
}

/// Binary `{0, 1}` volume.
pub type Mask = Volume<u8>;

impl<T: Copy> Volume<T> {
    pub fn filled(dims: Dims, value: T, kind: VolumeKind) -> Self {
        Volume {
            dims,
            spacing: [1.0; 3],
            kind,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<T>, kind: VolumeKind) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {:?}",
                data.len(),
                dims.as_array()
            )));
        }
        Ok(Volume {
            dims,
            spacing: [1.0; 3],
            kind,
            data,
        })
    }

    pub fn from_fn(dims: Dims, kind: VolumeKind, mut f: impl FnMut(Voxel) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f([x, y, z]));
                }
            }
        }
        Volume {
            dims,
            spacing: [1.0; 3],
            kind,
            data,
        }
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn with_kind(mut self, kind: VolumeKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, p: Voxel) -> T {
        self.data[self.dims.index(p)]
    }

    pub fn try_get(&self, p: Voxel) -> Result<T> {
        self.dims.check(p)?;
        Ok(self.get(p))
    }

    #[inline]
    pub fn set(&mut self, p: Voxel, value: T) {
        let i = self.dims.index(p);
        self.data[i] = value;
    }

    pub fn map<U: Copy>(&self, kind: VolumeKind, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            spacing: self.spacing,
            kind,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of the box `[start, start + size)`.
    pub fn crop(&self, start: Voxel, size: Dims) -> Result<Volume<T>> {
        for a in 0..3 {
            if start[a] + size.as_array()[a] > self.dims.as_array()[a] {
                return Err(Error::DimensionMismatch(format!(
                    "crop {:?}+{:?} exceeds dims {:?}",
                    start,
                    size.as_array(),
                    self.dims.as_array()
                )));
            }
        }
        let mut data = Vec::with_capacity(size.len());
        for z in 0..size.nz {
            for y in 0..size.ny {
                let row = self.dims.index([start[0], start[1] + y, start[2] + z]);
                data.extend_from_slice(&self.data[row..row + size.nx]);
            }
        }
        Ok(Volume {
            dims: size,
            spacing: self.spacing,
            kind: self.kind,
            data,
        })
    }
}

impl Mask {
    pub fn empty(dims: Dims) -> Self {
        Volume::filled(dims, 0, VolumeKind::BinaryMask)
    }

    /// Validates `{0, 1}` content and tags the volume as a mask.
    pub fn into_mask(self) -> Result<Mask> {
        if let Some(i) = self.data.iter().position(|&v| v > 1) {
            return Err(Error::NotBinary(format!(
                "value {} at voxel {:?}",
                self.data[i],
                self.dims.coord(i)
            )));
        }
        Ok(self.with_kind(VolumeKind::BinaryMask))
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v <= 1)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    #[inline]
    pub fn is_set(&self, p: Voxel) -> bool {
        self.get(p) != 0
    }

    pub fn foreground(&self) -> impl Iterator<Item = Voxel> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| self.dims.coord(i))
    }
}

impl Volume<f32> {
    pub fn zeros(dims: Dims, kind: VolumeKind) -> Self {
        Volume::filled(dims, 0.0, kind)
    }

    pub fn min_max(&self) -> Option<(f32, f32)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn negated(&self) -> Self {
        self.map(self.kind, |v| -v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let d = Dims::new(3, 4, 5);
        for i in 0..d.len() {
            assert_eq!(d.index(d.coord(i)), i);
        }
        assert_eq!(d.index([1, 2, 3]), 1 + 3 * (2 + 4 * 3));
    }

    #[test]
    fn offset_clips_at_borders() {
        let d = Dims::cube(4);
        assert_eq!(d.offset([0, 0, 0], [-1, 0, 0]), None);
        assert_eq!(d.offset([3, 0, 0], [1, 0, 0]), None);
        assert_eq!(d.offset([1, 1, 1], [1, -1, 2]), Some([2, 0, 3]));
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Volume::from_vec(Dims::cube(2), vec![0u8; 7], VolumeKind::BinaryMask).is_err());
    }

    #[test]
    fn crop_aligns_with_source() {
        let v = Volume::from_fn(Dims::new(5, 6, 7), VolumeKind::Intensity, |[x, y, z]| {
            (x * 100 + y * 10 + z) as f32
        });
        let c = v.crop([1, 2, 3], Dims::new(3, 3, 3)).unwrap();
        assert_eq!(c.get([0, 0, 0]), v.get([1, 2, 3]));
        assert_eq!(c.get([2, 1, 0]), v.get([3, 3, 3]));
        assert!(v.crop([3, 0, 0], Dims::new(3, 1, 1)).is_err());
    }

    #[test]
    fn into_mask_rejects_labels() {
        let v = Volume::from_vec(Dims::new(2, 1, 1), vec![0u8, 2], VolumeKind::Intensity).unwrap();
        assert!(matches!(v.into_mask(), Err(Error::NotBinary(_))));
    }
}
