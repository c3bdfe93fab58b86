//! Single-file header + payload container for feature and depth maps.
//!
//! ```text
//! offset  size  content
//! 0       4     magic "ZPKT"
//! 4       4     format version, u32 little-endian (currently 1)
//! 8       4     header length N, u32 little-endian
//! 12      N     UTF-8 JSON header (see `FileHeader`)
//! 12+N    P     payload: f32 little-endian values, row-major
//!               (feature maps: cell-major then channel), followed for
//!               masked feature maps by ⌈h·w/8⌉ bytes of mask bits,
//!               row-major, least-significant bit first
//! ```
//!
//! `payload_bytes` in the header must equal `P` exactly, and `checksum` is
//! the CRC-32 (IEEE) of those `P` bytes. Depth values are stored as
//! `meters / scale`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::matching::FeatureMap;
use crate::synth::DepthMap;

pub const MAGIC: [u8; 4] = *b"ZPKT";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Feature,
    Depth,
}

/// JSON part of the container header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHeader {
    pub kind: PayloadKind,
    /// `[h, w, c]` for feature maps, `[h, w]` for depth maps.
    pub dims: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_stride: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_offset: Option<f64>,
    #[serde(default)]
    pub has_mask: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub payload_bytes: u64,
    pub checksum: u32,
}

fn pack(header: &FileHeader, payload: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    out
}

/// Splits a container into its header and checksummed payload.
fn unpack(bytes: &[u8], kind: PayloadKind) -> Result<(FileHeader, &[u8]), FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated { expected: PREFIX_LEN as u64, found: bytes.len() as u64 });
    }
    if bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
    }
    if bytes.len() < PREFIX_LEN {
        return Err(FormatError::Truncated { expected: PREFIX_LEN as u64, found: bytes.len() as u64 });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[PREFIX_LEN..];
    if body.len() < header_len {
        return Err(FormatError::Truncated {
            expected: (PREFIX_LEN + header_len) as u64,
            found: bytes.len() as u64,
        });
    }
    let header: FileHeader =
        serde_json::from_slice(&body[..header_len]).map_err(|e| FormatError::BadHeader(e.to_string()))?;
    if header.kind != kind {
        return Err(FormatError::WrongKind { expected: kind, found: header.kind });
    }
    let payload = &body[header_len..];
    let declared = header.payload_bytes;
    if (payload.len() as u64) < declared {
        return Err(FormatError::Truncated {
            expected: (PREFIX_LEN + header_len) as u64 + declared,
            found: bytes.len() as u64,
        });
    }
    if payload.len() as u64 > declared {
        return Err(FormatError::DimensionMismatch(format!(
            "{} trailing bytes after the declared payload",
            payload.len() as u64 - declared
        )));
    }
    let crc = crc32fast::hash(payload);
    if crc != header.checksum {
        return Err(FormatError::ChecksumMismatch { expected: header.checksum, found: crc });
    }
    Ok((header, payload))
}

fn check_payload_size(header: &FileHeader, values: u64, mask_bytes: u64) -> Result<(), FormatError> {
    let expected = values.checked_mul(4).and_then(|v| v.checked_add(mask_bytes));
    if expected != Some(header.payload_bytes) {
        return Err(FormatError::DimensionMismatch(format!(
            "dims {:?} imply {} payload bytes, header declares {}",
            header.dims,
            expected.map_or_else(|| "overflowing".to_string(), |e| e.to_string()),
            header.payload_bytes
        )));
    }
    Ok(())
}

fn floats(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect()
}

pub fn encode_feature_map(f: &FeatureMap) -> Vec<u8> {
    let cells = f.num_cells();
    let mut payload = Vec::with_capacity(f.data().len() * 4 + cells.div_ceil(8));
    for v in f.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(mask) = f.mask() {
        let mut bits = vec![0u8; cells.div_ceil(8)];
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            bits[i / 8] |= 1 << (i % 8);
        }
        payload.extend_from_slice(&bits);
    }
    let header = FileHeader {
        kind: PayloadKind::Feature,
        dims: vec![f.height() as u64, f.width() as u64, f.channels() as u64],
        pixel_stride: Some(f.pixel_stride()),
        pixel_offset: Some(f.pixel_offset()),
        has_mask: f.mask().is_some(),
        scale: None,
        payload_bytes: payload.len() as u64,
        checksum: crc32fast::hash(&payload),
    };
    pack(&header, &payload)
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap, FormatError> {
    let (header, payload) = unpack(bytes, PayloadKind::Feature)?;
    let [h, w, c] = header.dims[..] else {
        return Err(FormatError::DimensionMismatch(format!(
            "feature map needs 3 dims, got {:?}",
            header.dims
        )));
    };
    let cells = h.checked_mul(w).ok_or_else(|| FormatError::DimensionMismatch("dims overflow".into()))?;
    let values = cells.checked_mul(c).ok_or_else(|| FormatError::DimensionMismatch("dims overflow".into()))?;
    let mask_bytes = if header.has_mask { cells.div_ceil(8) } else { 0 };
    check_payload_size(&header, values, mask_bytes)?;
    let (stride, offset) = match (header.pixel_stride, header.pixel_offset) {
        (Some(s), Some(o)) => (s, o),
        _ => return Err(FormatError::BadHeader("feature header lacks pixel_stride/pixel_offset".into())),
    };
    let split = values as usize * 4;
    let data = floats(&payload[..split]);
    let mask = header.has_mask.then(|| {
        let bits = &payload[split..];
        (0..cells as usize).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect()
    });
    FeatureMap::new(h as usize, w as usize, c as usize, data, stride, offset, mask)
        .map_err(|e| FormatError::InvalidValue(e.to_string()))
}

pub fn encode_depth_map(d: &DepthMap) -> Vec<u8> {
    let mut payload = Vec::with_capacity(d.values().len() * 4);
    for v in d.values() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let header = FileHeader {
        kind: PayloadKind::Depth,
        dims: vec![u64::from(d.height()), u64::from(d.width())],
        pixel_stride: None,
        pixel_offset: None,
        has_mask: false,
        scale: Some(1.0),
        payload_bytes: payload.len() as u64,
        checksum: crc32fast::hash(&payload),
    };
    pack(&header, &payload)
}

pub fn decode_depth_map(bytes: &[u8]) -> Result<DepthMap, FormatError> {
    let (header, payload) = unpack(bytes, PayloadKind::Depth)?;
    let [h, w] = header.dims[..] else {
        return Err(FormatError::DimensionMismatch(format!("depth map needs 2 dims, got {:?}", header.dims)));
    };
    if header.has_mask {
        return Err(FormatError::BadHeader("depth maps carry no mask".into()));
    }
    let (h32, w32) = match (u32::try_from(h), u32::try_from(w)) {
        (Ok(h), Ok(w)) => (h, w),
        _ => return Err(FormatError::DimensionMismatch(format!("dims {:?} exceed u32", header.dims))),
    };
    let values = h.checked_mul(w).ok_or_else(|| FormatError::DimensionMismatch("dims overflow".into()))?;
    check_payload_size(&header, values, 0)?;
    let scale = header.scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FormatError::BadHeader(format!("depth scale {scale} must be positive")));
    }
    let mut data = floats(payload);
    if scale != 1.0 {
        data.iter_mut().for_each(|v| *v = (f64::from(*v) * scale) as f32);
    }
    DepthMap::new(w32, h32, data).map_err(|e| FormatError::InvalidValue(e.to_string()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| FormatError::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub fn write_feature_map(path: &Path, f: &FeatureMap) -> Result<(), FormatError> {
    write_bytes(path, &encode_feature_map(f))
}

pub fn read_feature_map(path: &Path) -> Result<FeatureMap, FormatError> {
    decode_feature_map(&read_bytes(path)?)
}

pub fn write_depth_map(path: &Path, d: &DepthMap) -> Result<(), FormatError> {
    write_bytes(path, &encode_depth_map(d))
}

pub fn read_depth_map(path: &Path) -> Result<DepthMap, FormatError> {
    decode_depth_map(&read_bytes(path)?)
}
