//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CSCHCKP1"
//! 8       4     u32 header length H
//! 12      H     UTF-8 JSON architecture descriptor
//! 12+H    8     u64 parameter count P
//! 20+H    8*P   f64 parameters in storage order
//! ```
//!
//! Parameters are stored as raw IEEE-754 bits, so a checkpoint round-trips
//! bit-exactly.

use std::fs;
use std::path::Path;

use super::{NetworkArch, ParamVector, PolicyError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CSCHCKP1";

pub fn encode_checkpoint(arch: &NetworkArch, params: &ParamVector) -> Vec<u8> {
    let header = serde_json::to_vec(arch).expect("architecture serializes");
    let mut out = Vec::with_capacity(20 + header.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(NetworkArch, ParamVector), PolicyError> {
    let bad = |m: &str| PolicyError::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end + 8 {
        return Err(bad("truncated header"));
    }
    let arch: NetworkArch = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| PolicyError::Checkpoint(format!("architecture header: {e}")))?;
    arch.validate()?;
    let count = u64::from_le_bytes(bytes[header_end..header_end + 8].try_into().unwrap()) as usize;
    let body = &bytes[header_end + 8..];
    if body.len() != count * 8 {
        return Err(bad("parameter block length does not match its count"));
    }
    if count != arch.param_count() {
        return Err(PolicyError::ParamLength {
            expected: arch.param_count(),
            actual: count,
        });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((arch, ParamVector::new(values)))
}

pub fn write_checkpoint(
    path: impl AsRef<Path>,
    arch: &NetworkArch,
    params: &ParamVector,
) -> Result<(), PolicyError> {
    fs::write(path, encode_checkpoint(arch, params))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkArch, ParamVector), PolicyError> {
    decode_checkpoint(&fs::read(path)?)
}
