//! Volume files: single-file NIfTI-1 (`.nii`, optionally gzipped) and the
//! RAW pair (`<name>.json` header + `<name>.raw` payload).
//!
//! Only the voxel grid, spacing and element type are honored. Orientation
//! (qform/sform) is ignored on read and written as unset.

mod nifti;
mod raw;

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask, Volume, VolumeKind};

pub use nifti::{read_nifti, write_nifti};
pub use raw::{read_raw, write_raw, RawHeader};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    F32,
}

impl DataType {
    pub fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DataType::U8 => "uint8",
            DataType::I16 => "int16",
            DataType::F32 => "float32",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "uint8" => Some(DataType::U8),
            "int16" => Some(DataType::I16),
            "float32" => Some(DataType::F32),
            _ => None,
        }
    }

    fn nifti_code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::F32 => 16,
        }
    }

    fn from_nifti_code(code: i16) -> Option<Self> {
        match code {
            2 => Some(DataType::U8),
            4 => Some(DataType::I16),
            16 => Some(DataType::F32),
            _ => None,
        }
    }
}

/// Element types that can be stored on disk.
pub trait Element: Copy + Send + Sync + 'static {
    const DTYPE: DataType;
    fn write_le(self, out: &mut Vec<u8>);
    fn wrap(v: Volume<Self>) -> AnyVolume;
}

impl Element for u8 {
    const DTYPE: DataType = DataType::U8;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn wrap(v: Volume<Self>) -> AnyVolume {
        AnyVolume::U8(v)
    }
}

impl Element for i16 {
    const DTYPE: DataType = DataType::I16;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn wrap(v: Volume<Self>) -> AnyVolume {
        AnyVolume::I16(v)
    }
}

impl Element for f32 {
    const DTYPE: DataType = DataType::F32;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn wrap(v: Volume<Self>) -> AnyVolume {
        AnyVolume::F32(v)
    }
}

/// A volume as loaded from disk, tagged by its stored element type.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyVolume {
    U8(Volume<u8>),
    I16(Volume<i16>),
    F32(Volume<f32>),
}

impl AnyVolume {
    pub fn dims(&self) -> Dims {
        match self {
            AnyVolume::U8(v) => v.dims(),
            AnyVolume::I16(v) => v.dims(),
            AnyVolume::F32(v) => v.dims(),
        }
    }

    pub fn kind(&self) -> VolumeKind {
        match self {
            AnyVolume::U8(v) => v.kind(),
            AnyVolume::I16(v) => v.kind(),
            AnyVolume::F32(v) => v.kind(),
        }
    }

    pub fn dtype(&self) -> DataType {
        match self {
            AnyVolume::U8(_) => DataType::U8,
            AnyVolume::I16(_) => DataType::I16,
            AnyVolume::F32(_) => DataType::F32,
        }
    }

    /// Integer volumes with values in `{0, 1}` convert; anything else errors.
    pub fn into_mask(self) -> Result<Mask> {
        match self {
            AnyVolume::U8(v) => v.into_mask(),
            AnyVolume::I16(v) => {
                if let Some(i) = v.data().iter().position(|&x| x != 0 && x != 1) {
                    return Err(Error::NotBinary(format!(
                        "value {} at voxel {:?}",
                        v.data()[i],
                        v.dims().coord(i)
                    )));
                }
                Ok(v.map(VolumeKind::BinaryMask, |x| x as u8))
            }
            AnyVolume::F32(_) => Err(Error::NotBinary("float32 volume".into())),
        }
    }

    pub fn into_f32(self) -> Volume<f32> {
        match self {
            AnyVolume::U8(v) => v.map(v.kind(), f32::from),
            AnyVolume::I16(v) => v.map(v.kind(), f32::from),
            AnyVolume::F32(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Nifti,
    NiftiGz,
    Raw,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        if name.ends_with(".nii.gz") {
            Ok(Format::NiftiGz)
        } else if name.ends_with(".nii") {
            Ok(Format::Nifti)
        } else if name.ends_with(".json") || name.ends_with(".raw") {
            Ok(Format::Raw)
        } else {
            Err(Error::UnsupportedFormat(path.to_path_buf()))
        }
    }
}

/// Loads a volume, dispatching on the file extension.
pub fn read_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    match Format::from_path(path)? {
        Format::Nifti | Format::NiftiGz => read_nifti(path),
        Format::Raw => read_raw(path),
    }
}

pub fn write_volume<T: Element>(v: &Volume<T>, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    match format {
        Format::Nifti => write_nifti(v, path, false),
        Format::NiftiGz => write_nifti(v, path, true),
        Format::Raw => write_raw(v, path),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    read_volume(path)?.into_mask()
}

pub fn read_f32(path: impl AsRef<Path>) -> Result<Volume<f32>> {
    Ok(read_volume(path)?.into_f32())
}

/// Decodes a little- or big-endian payload into a typed volume.
pub(crate) fn decode_payload(
    path: &Path,
    bytes: &[u8],
    dims: Dims,
    dtype: DataType,
    big_endian: bool,
    spacing: [f64; 3],
    kind: Option<VolumeKind>,
) -> Result<AnyVolume> {
    let expected = dims.len() * dtype.size();
    if bytes.len() != expected {
        return Err(Error::PayloadSize {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let vol = match dtype {
        DataType::U8 => {
            let v = Volume::from_vec(dims, bytes.to_vec(), VolumeKind::Intensity)?;
            let kind = kind.unwrap_or(if v.is_binary() {
                VolumeKind::BinaryMask
            } else {
                VolumeKind::Intensity
            });
            AnyVolume::U8(v.with_kind(kind))
        }
        DataType::I16 => {
            let data: Vec<i16> = bytes
                .chunks_exact(2)
                .map(|c| {
                    let b = [c[0], c[1]];
                    if big_endian {
                        i16::from_be_bytes(b)
                    } else {
                        i16::from_le_bytes(b)
                    }
                })
                .collect();
            let binary = data.iter().all(|&x| x == 0 || x == 1);
            let kind = kind.unwrap_or(if binary {
                VolumeKind::BinaryMask
            } else {
                VolumeKind::Intensity
            });
            AnyVolume::I16(Volume::from_vec(dims, data, kind)?)
        }
        DataType::F32 => {
            let data: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| {
                    let b = [c[0], c[1], c[2], c[3]];
                    if big_endian {
                        f32::from_be_bytes(b)
                    } else {
                        f32::from_le_bytes(b)
                    }
                })
                .collect();
            if let Some(index) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    path: path.to_path_buf(),
                    index,
                });
            }
            let kind = kind.unwrap_or(VolumeKind::Intensity);
            AnyVolume::F32(Volume::from_vec(dims, data, kind)?)
        }
    };
    Ok(match vol {
        AnyVolume::U8(v) => AnyVolume::U8(v.with_spacing(spacing)),
        AnyVolume::I16(v) => AnyVolume::I16(v.with_spacing(spacing)),
        AnyVolume::F32(v) => AnyVolume::F32(v.with_spacing(spacing)),
    })
}

pub(crate) fn encode_payload<T: Element>(v: &Volume<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.len() * T::DTYPE.size());
    for &x in v.data() {
        x.write_le(&mut out);
    }
    out
}
