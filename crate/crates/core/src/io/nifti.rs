use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{decode_payload, encode_payload, AnyVolume, DataType, Element};
use crate::error::{Error, Result};
use crate::volume::{Dims, Volume, VolumeKind};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const KIND_TAG: &str = "vesselxai:kind=";

struct Cursor<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Cursor<'_> {
    fn i16(&self, at: usize) -> i16 {
        let b = [self.bytes[at], self.bytes[at + 1]];
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn f32(&self, at: usize) -> f32 {
        let b = [
            self.bytes[at],
            self.bytes[at + 1],
            self.bytes[at + 2],
            self.bytes[at + 3],
        ];
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_gz = raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b;
    let bytes = if is_gz {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    if bytes.len() < HEADER_SIZE {
        return Err(malformed(path, format!("{} bytes, shorter than a header", bytes.len())));
    }
    let sizeof_hdr = [bytes[0], bytes[1], bytes[2], bytes[3]];
    let big_endian = match (i32::from_le_bytes(sizeof_hdr), i32::from_be_bytes(sizeof_hdr)) {
        (348, _) => false,
        (_, 348) => true,
        (n, _) => return Err(malformed(path, format!("sizeof_hdr {n}"))),
    };
    if &bytes[344..348] != b"n+1\0" {
        return Err(malformed(path, "magic is not \"n+1\\0\" (single-file NIfTI-1 only)"));
    }
    let h = Cursor {
        bytes: &bytes,
        big_endian,
    };

    let ndim = h.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(malformed(path, format!("dim[0] = {ndim}")));
    }
    let mut dim = [1usize; 7];
    for (i, d) in dim.iter_mut().enumerate().take(ndim as usize) {
        let v = h.i16(42 + 2 * i);
        if v < 1 {
            return Err(malformed(path, format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    if dim[3..].iter().any(|&d| d != 1) {
        return Err(malformed(path, "volumes with more than 3 dimensions are not supported"));
    }
    let dims = Dims::new(dim[0], dim[1], dim[2]);

    let code = h.i16(70);
    let dtype = DataType::from_nifti_code(code).ok_or_else(|| Error::UnsupportedDataType {
        path: path.to_path_buf(),
        dtype: format!("NIfTI datatype code {code}"),
    })?;

    let slope = h.f32(112);
    let inter = h.f32(116);
    if !(slope == 0.0 || slope == 1.0) || inter != 0.0 {
        return Err(Error::UnsupportedDataType {
            path: path.to_path_buf(),
            dtype: format!("scaled data (scl_slope {slope}, scl_inter {inter})"),
        });
    }

    let spacing = [h.f32(80) as f64, h.f32(84) as f64, h.f32(88) as f64];
    let vox_offset = h.f32(108);
    if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(malformed(path, format!("vox_offset {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    if vox_offset > bytes.len() {
        return Err(Error::PayloadSize {
            path: path.to_path_buf(),
            expected: dims.len() * dtype.size(),
            found: 0,
        });
    }

    let descrip = &bytes[148..228];
    let descrip = String::from_utf8_lossy(descrip.split(|&b| b == 0).next().unwrap_or_default());
    let kind = descrip
        .strip_prefix(KIND_TAG)
        .and_then(|k| VolumeKind::parse(k.trim()));

    decode_payload(path, &bytes[vox_offset..], dims, dtype, big_endian, spacing, kind)
}

pub fn write_nifti<T: Element>(v: &Volume<T>, path: impl AsRef<Path>, gzip: bool) -> Result<()> {
    let path = path.as_ref();
    let dims = v.dims();
    for d in dims.as_array() {
        if d > i16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "dimension {d} exceeds the NIfTI-1 limit"
            )));
        }
    }
    let mut hdr = vec![0u8; VOX_OFFSET];
    let put_i16 = |hdr: &mut Vec<u8>, at: usize, x: i16| hdr[at..at + 2].copy_from_slice(&x.to_le_bytes());
    let put_f32 = |hdr: &mut Vec<u8>, at: usize, x: f32| hdr[at..at + 4].copy_from_slice(&x.to_le_bytes());

    hdr[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    let dim = [3, dims.nx as i16, dims.ny as i16, dims.nz as i16, 1, 1, 1, 1];
    for (i, d) in dim.into_iter().enumerate() {
        put_i16(&mut hdr, 40 + 2 * i, d);
    }
    put_i16(&mut hdr, 70, T::DTYPE.nifti_code());
    put_i16(&mut hdr, 72, (T::DTYPE.size() * 8) as i16);
    let sp = v.spacing();
    let pixdim = [1.0, sp[0] as f32, sp[1] as f32, sp[2] as f32, 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.into_iter().enumerate() {
        put_f32(&mut hdr, 76 + 4 * i, p);
    }
    put_f32(&mut hdr, 108, VOX_OFFSET as f32);
    put_f32(&mut hdr, 112, 1.0);
    hdr[123] = 2; // xyzt_units: millimeters
    let tag = format!("{KIND_TAG}{}", v.kind().as_str());
    hdr[148..148 + tag.len()].copy_from_slice(tag.as_bytes());
    hdr[344..348].copy_from_slice(b"n+1\0");

    let mut bytes = hdr;
    bytes.extend_from_slice(&encode_payload(v));
    let bytes = if gzip {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_for(dims: [i16; 3], code: i16) -> Vec<u8> {
        let v = Volume::filled(Dims::cube(1), 0u8, VolumeKind::BinaryMask);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.nii");
        write_nifti(&v, &p, false).unwrap();
        let mut b = fs::read(&p).unwrap();
        b.truncate(VOX_OFFSET);
        for (i, d) in dims.into_iter().enumerate() {
            b[42 + 2 * i..44 + 2 * i].copy_from_slice(&d.to_le_bytes());
        }
        b[70..72].copy_from_slice(&code.to_le_bytes());
        b
    }

    #[test]
    fn declared_dims_must_match_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.nii");
        let mut b = header_for([10, 10, 10], 2);
        b.extend(std::iter::repeat_n(0u8, 999));
        fs::write(&p, &b).unwrap();
        assert!(matches!(
            read_nifti(&p),
            Err(Error::PayloadSize { expected: 1000, found: 999, .. })
        ));
    }

    #[test]
    fn unsupported_datatype() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f64.nii");
        let mut b = header_for([2, 2, 2], 64);
        b.extend(std::iter::repeat_n(0u8, 64));
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::UnsupportedDataType { .. })));
    }

    #[test]
    fn bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pair.nii");
        let mut b = header_for([1, 1, 1], 2);
        b[344..348].copy_from_slice(b"ni1\0");
        b.push(0);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::MalformedHeader { .. })));
    }

    #[test]
    fn big_endian_header_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("be.nii");
        let mut b = vec![0u8; VOX_OFFSET];
        b[0..4].copy_from_slice(&348i32.to_be_bytes());
        for (i, d) in [3i16, 2, 1, 1].into_iter().enumerate() {
            b[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_be_bytes());
        }
        b[70..72].copy_from_slice(&4i16.to_be_bytes());
        b[108..112].copy_from_slice(&352f32.to_be_bytes());
        b[344..348].copy_from_slice(b"n+1\0");
        b.extend_from_slice(&(-3i16).to_be_bytes());
        b.extend_from_slice(&7i16.to_be_bytes());
        fs::write(&p, &b).unwrap();
        match read_nifti(&p).unwrap() {
            AnyVolume::I16(v) => assert_eq!(v.data(), &[-3, 7]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn four_dimensional_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("4d.nii");
        let mut b = header_for([1, 1, 1], 2);
        b[40..42].copy_from_slice(&4i16.to_le_bytes());
        b[48..50].copy_from_slice(&2i16.to_le_bytes());
        b.extend([0u8; 2]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::MalformedHeader { .. })));
    }
}
