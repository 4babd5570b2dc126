//! Model checkpoint layout (little-endian):
//!
//! | offset | type       | field                              |
//! |--------|------------|------------------------------------|
//! | 0      | [u8; 8]    | magic `FUZZM001`                   |
//! | 8      | u32 × 6    | d_in, d_query, d_value, d_hidden, n_rules, n_classes |
//! | 32     | f32        | input_scale                        |
//! | 36     | u32        | metadata length `n` in bytes       |
//! | 40     | [u8; n]    | UTF-8 metadata (JSON, may be empty)|
//! | 40 + n | f32 ...    | parameters: centers, log_lambda, W_query, W_value, W1, b1, W2, b2 |

use std::fs;
use std::path::Path;

use super::{FuzzyModel, ModelDims};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"FUZZM001";
const FIXED_HEADER: usize = 40;

pub fn encode_model(model: &FuzzyModel, metadata: &str) -> Vec<u8> {
    let d = &model.dims;
    let mut out = Vec::with_capacity(FIXED_HEADER + metadata.len() + 4 * model.params.len());
    out.extend_from_slice(MODEL_MAGIC);
    for v in [
        d.d_in,
        d.d_query,
        d.d_value,
        d.d_hidden,
        d.n_rules,
        d.n_classes,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.input_scale as f32).to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(metadata.as_bytes());
    for p in &model.params {
        out.extend_from_slice(&(*p as f32).to_le_bytes());
    }
    out
}

/// Returns the model and its metadata string.
pub fn decode_model(bytes: &[u8], path: &Path) -> Result<(FuzzyModel, String)> {
    if bytes.len() < FIXED_HEADER {
        return Err(Error::format(path, "truncated model header"));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(Error::format(path, "bad model magic"));
    }
    let u32_at =
        |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let dims = ModelDims {
        d_in: u32_at(8),
        d_query: u32_at(12),
        d_value: u32_at(16),
        d_hidden: u32_at(20),
        n_rules: u32_at(24),
        n_classes: u32_at(28),
    };
    let input_scale = f32::from_le_bytes(bytes[32..36].try_into().expect("4 bytes")) as f64;
    let meta_len = u32_at(36);
    let params_at = FIXED_HEADER
        .checked_add(meta_len)
        .filter(|end| *end <= bytes.len())
        .ok_or_else(|| Error::format(path, "truncated metadata"))?;
    let metadata = std::str::from_utf8(&bytes[FIXED_HEADER..params_at])
        .map_err(|_| Error::format(path, "metadata is not UTF-8"))?
        .to_owned();
    let rest = &bytes[params_at..];
    if !rest.len().is_multiple_of(4) {
        return Err(Error::format(
            path,
            "parameter block is not a whole number of f32",
        ));
    }
    let params = rest
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let model = FuzzyModel::from_params(dims, params, input_scale)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((model, metadata))
}

pub fn write_model(model: &FuzzyModel, metadata: &str, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model, metadata)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<(FuzzyModel, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
