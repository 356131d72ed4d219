//! `MXW1` weight files.
//!
//! ```text
//! magic "MXW1" | u8 version | u8 layers | u16 K | u16 d | u16 ffn_mult
//! | f32 decay[layers] | f32 params...
//! ```
//!
//! Parameters follow `E_addr`, `E_pc`, then per layer `W_Q W_K W_V W_O F1 F2`,
//! then the head; every matrix row-major. Little-endian, no padding.

use std::path::Path;

use super::{ModelConfig, ModelError, ModelWeights};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"MXW1";
pub const WEIGHTS_VERSION: u8 = 1;
const FIXED_HEADER: usize = 12;

pub fn encode_weights(weights: &ModelWeights) -> Vec<u8> {
    let c = &weights.config;
    let mut out = Vec::with_capacity(FIXED_HEADER + 4 * (c.layers + weights.param_count()));
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.push(WEIGHTS_VERSION);
    out.push(c.layers as u8);
    out.extend_from_slice(&(c.vocab as u16).to_le_bytes());
    out.extend_from_slice(&(c.hidden as u16).to_le_bytes());
    out.extend_from_slice(&(c.ffn_mult as u16).to_le_bytes());
    for g in &c.decay {
        out.extend_from_slice(&g.to_le_bytes());
    }
    for x in weights.tensors().flatten() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> Result<ModelWeights, ModelError> {
    if bytes.len() < FIXED_HEADER {
        return Err(ModelError::ShapeMismatch { expected: FIXED_HEADER, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != WEIGHTS_MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    if bytes[4] != WEIGHTS_VERSION {
        return Err(ModelError::UnsupportedVersion(bytes[4]));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    let layers = bytes[5] as usize;
    let mut config = ModelConfig {
        vocab: u16_at(6),
        hidden: u16_at(8),
        layers,
        ffn_mult: u16_at(10),
        decay: Vec::with_capacity(layers),
    };
    let params_at = FIXED_HEADER + 4 * layers;
    if bytes.len() < params_at {
        return Err(ModelError::ShapeMismatch { expected: params_at, found: bytes.len() });
    }
    let mut floats = bytes[FIXED_HEADER..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    config.decay.extend(floats.by_ref().take(layers));
    config.validate()?;

    let expected = params_at + 4 * config.param_count();
    if bytes.len() != expected {
        return Err(ModelError::ShapeMismatch { expected, found: bytes.len() });
    }
    let mut weights = ModelWeights::zeros(config)?;
    for t in weights.tensors_mut() {
        t.iter_mut().zip(floats.by_ref()).for_each(|(dst, src)| *dst = src);
    }
    weights.check_finite()?;
    Ok(weights)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights, ModelError> {
    decode_weights(&std::fs::read(path)?)
}

pub fn save_weights(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<(), ModelError> {
    weights.config.validate()?;
    crate::fsutil::write_atomic(path.as_ref(), &encode_weights(weights))?;
    Ok(())
}
