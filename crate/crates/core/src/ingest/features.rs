//! Binary feature matrix format, all integers little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `SSCF`                   |
//! | 4      | 4    | version, u32 = 1               |
//! | 8      | 4    | n_frames, u32                  |
//! | 12     | 4    | dim, u32 (>= 1)                |
//! | 16     | 4·n·d| f32 values, row-major by frame |

use std::path::Path;

use crate::domain::FeatureMatrix;
use crate::error::{Error, Result};
use crate::fsutil;

pub const FEATURE_MAGIC: &[u8; 4] = b"SSCF";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_HEADER_LEN: usize = 16;

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    let magic_len = bytes.len().min(4);
    if bytes[..magic_len] != FEATURE_MAGIC[..magic_len] {
        return Err(Error::BadMagic {
            found: bytes[..magic_len].to_vec(),
            expected: FEATURE_MAGIC,
        });
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(Error::Truncated {
            expected: FEATURE_HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 4);
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_frames = u32_at(bytes, 8) as u64;
    let dim = u32_at(bytes, 12) as u64;
    if dim == 0 {
        return Err(Error::Format("feature dim is 0".into()));
    }
    // At most 16 + 2^66 bytes, which overflows u64; saturate instead.
    let expected = (n_frames * dim)
        .checked_mul(4)
        .and_then(|p| p.checked_add(FEATURE_HEADER_LEN as u64))
        .unwrap_or(u64::MAX);
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after feature payload",
            found - expected
        )));
    }
    let data: Vec<f64> = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!(
            "non-finite feature value at frame {} dim {}",
            i as u64 / dim,
            i as u64 % dim
        )));
    }
    FeatureMatrix::new(n_frames as usize, dim as usize, data)
}

/// Serializes to the binary format. Values are narrowed to f32; a value
/// outside the f32 range is rejected rather than written as infinity.
pub fn encode_features(matrix: &FeatureMatrix) -> Result<Vec<u8>> {
    let n_frames = u32::try_from(matrix.n_frames())
        .map_err(|_| Error::invalid("n_frames does not fit in u32"))?;
    let dim = u32::try_from(matrix.dim()).map_err(|_| Error::invalid("dim does not fit in u32"))?;
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + matrix.data().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&n_frames.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for (i, &v) in matrix.data().iter().enumerate() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(Error::invalid(format!(
                "feature value {v} at index {i} overflows f32"
            )));
        }
        out.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    decode_features(&fsutil::read_bytes(path)?)
}

pub fn write_features(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    fsutil::write_atomic(path, &encode_features(matrix)?)
}
