//! On-disk formats: binary containers for feature and depth maps, the JSON
//! dataset manifest, and per-query match and result documents.

pub mod container;
pub mod manifest;
pub mod results;

use std::path::PathBuf;

pub use container::{
    decode_depth_map, decode_feature_map, encode_depth_map, encode_feature_map, read_depth_map, read_feature_map,
    write_depth_map, write_feature_map, FileHeader, PayloadKind, FORMAT_VERSION, MAGIC,
};
pub use manifest::{parse_manifest, read_manifest, write_manifest, DatasetManifest, PoseRecord, QueryView, ReferenceView};
pub use results::{read_json, write_json, write_results, MatchRecord, QueryResult, SummaryReport};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: expected at least {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("expected a {expected:?} payload, found {found:?}")]
    WrongKind { expected: PayloadKind, found: PayloadKind },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("checksum mismatch: header {expected:#010x}, payload {found:#010x}")]
    ChecksumMismatch { expected: u32, found: u32 },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("malformed JSON in {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest is not valid JSON: {0}")]
    Syntax(String),
    #[error("manifest field {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Io(#[from] FormatError),
}
