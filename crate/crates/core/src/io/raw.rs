use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{decode_payload, encode_payload, AnyVolume, DataType, Element};
use crate::error::{Error, Result};
use crate::volume::{Dims, Volume, VolumeKind};

/// JSON sidecar of a RAW volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: String,
    pub order: String,
    pub endianness: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

fn pair(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("raw"))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let (json_path, raw_path) = pair(path.as_ref());
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: RawHeader = serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
        path: json_path.clone(),
        reason: e.to_string(),
    })?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: json_path.clone(),
        reason,
    };
    if header.order != "x-fastest" {
        return Err(malformed(format!("order {:?}", header.order)));
    }
    let big_endian = match header.endianness.as_str() {
        "little" => false,
        "big" => true,
        other => return Err(malformed(format!("endianness {other:?}"))),
    };
    if header.dims.contains(&0) {
        return Err(malformed(format!("dims {:?}", header.dims)));
    }
    let dtype = DataType::from_name(&header.dtype).ok_or_else(|| Error::UnsupportedDataType {
        path: json_path.clone(),
        dtype: header.dtype.clone(),
    })?;
    let kind = match header.kind.as_deref() {
        None => None,
        Some(k) => Some(VolumeKind::parse(k).ok_or_else(|| malformed(format!("kind {k:?}")))?),
    };
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    decode_payload(
        &raw_path,
        &bytes,
        Dims::from_array(header.dims),
        dtype,
        big_endian,
        header.spacing,
        kind,
    )
}

/// Writes `<stem>.json` and `<stem>.raw` next to each other.
pub fn write_raw<T: Element>(v: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    let (json_path, raw_path) = pair(path.as_ref());
    let header = RawHeader {
        dims: v.dims().as_array(),
        spacing: v.spacing(),
        dtype: T::DTYPE.name().to_string(),
        order: "x-fastest".into(),
        endianness: "little".into(),
        kind: Some(v.kind().as_str().to_string()),
    };
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&raw_path, encode_payload(v)).map_err(|e| Error::io(&raw_path, e))
}
