//! File formats: dense feature files, JSON manifests and run configs, and
//! versioned binary checkpoints.

mod checkpoint;
mod config;
mod features;
mod manifest;

use std::path::Path;

use thiserror::Error;

pub use checkpoint::{
    decode_cluster_checkpoint, decode_head_checkpoint, encode_cluster_checkpoint,
    encode_head_checkpoint, read_cluster_checkpoint, read_head_checkpoint,
    write_cluster_checkpoint, write_head_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{load_config, PathsConfig, ProviderConfig, ProviderKind, RunConfig};
pub use features::{
    decode_features, encode_features, read_features, write_features, FeatureMatrix,
    FEATURE_MAGIC,
};
pub use manifest::{load_manifest, save_manifest, Label, Role, SampleManifest, SampleRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("trailing data: expected {expected} bytes, got {got}")]
    TrailingBytes { expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature dimension must be at least 1")]
    ZeroDimension,
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("size {0} does not fit the format")]
    TooLarge(usize),
    #[error("row {row} out of range for {n} rows")]
    RowOutOfRange { row: usize, n: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("sample {id:?} references row {row} but the feature file has {n} rows")]
    DanglingRowIndex { id: String, row: usize, n: usize },
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint holds {found}, expected {expected}")]
    WrongKind { expected: &'static str, found: String },
    #[error("checkpoint embedding dimension {found} does not match expected {expected}")]
    EmbedDimMismatch { expected: usize, found: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Formats a real with 9 significant digits, `%.9g` style: fixed notation
/// for decimal exponents in `[-4, 9)`, scientific otherwise, trailing zeros
/// dropped.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
