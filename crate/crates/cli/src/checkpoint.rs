//! Checkpoint file format.
//!
//! Layout: 8 magic bytes, a little-endian u64 header length, a UTF-8 JSON
//! header (version, network config, tensor manifest with shapes and byte
//! offsets), then the raw little-endian f64 parameter blob. Round trips are
//! bit-exact.

use std::path::Path;

use lrsim_core::gauss::BankSpec;
use lrsim_core::net::{DegradationModel, NetConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"LRSMCKPT";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ConfigRepr,
    tensors: Vec<TensorRepr>,
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    channels: usize,
    num_resblocks: usize,
    scale: usize,
    bank: BankRepr,
}

#[derive(Serialize, Deserialize)]
struct BankRepr {
    angles: Vec<f64>,
    aspect: f64,
    factors: Vec<f64>,
    roi_half_width: f64,
    kernel_size: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the parameter blob.
    offset: u64,
    /// Element count.
    count: u64,
}

fn config_repr(config: &NetConfig) -> ConfigRepr {
    ConfigRepr {
        channels: config.channels,
        num_resblocks: config.num_resblocks,
        scale: config.scale,
        bank: BankRepr {
            angles: config.bank.angles.clone(),
            aspect: config.bank.aspect,
            factors: config.bank.factors.clone(),
            roi_half_width: config.bank.roi_half_width,
            kernel_size: config.bank.kernel_size,
        },
    }
}

fn config_from_repr(repr: ConfigRepr) -> NetConfig {
    NetConfig {
        channels: repr.channels,
        num_resblocks: repr.num_resblocks,
        scale: repr.scale,
        bank: BankSpec {
            angles: repr.bank.angles,
            aspect: repr.bank.aspect,
            factors: repr.bank.factors,
            roi_half_width: repr.bank.roi_half_width,
            kernel_size: repr.bank.kernel_size,
        },
    }
}

/// Serializes a model to the checkpoint byte format.
pub fn model_to_bytes(model: &DegradationModel) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    for (name, tensor) in model.named_parameters() {
        let values = tensor.to_vec();
        tensors.push(TensorRepr {
            name,
            shape: tensor.shape().to_vec(),
            offset: blob.len() as u64,
            count: values.len() as u64,
        });
        for v in values {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header { version: VERSION, config: config_repr(model.config()), tensors };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    out
}

pub fn save_model(model: &DegradationModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| CliError::io(path, e))
}

/// Deserializes a model; every parameter named in the manifest must exist
/// in the reconstructed architecture and vice versa.
pub fn model_from_bytes(bytes: &[u8]) -> Result<DegradationModel> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CliError::format("not a checkpoint (bad magic bytes)"));
    }
    let mut len8 = [0u8; 8];
    len8.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
    let header_len = u64::from_le_bytes(len8) as usize;
    let header_start = MAGIC.len() + 8;
    let header_bytes = bytes
        .get(header_start..header_start + header_len)
        .ok_or_else(|| CliError::format("checkpoint header truncated"))?;
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| CliError::format(format!("bad checkpoint header: {e}")))?;
    if header.version != VERSION {
        return Err(CliError::format(format!(
            "checkpoint version {} not supported (expected {VERSION})",
            header.version
        )));
    }
    let config = config_from_repr(header.config);
    let model = DegradationModel::new(config, 0)
        .map_err(|e| CliError::format(format!("bad checkpoint config: {e}")))?;
    let blob = &bytes[header_start + header_len..];
    let mut loaded = std::collections::BTreeSet::new();
    for t in &header.tensors {
        let start = t.offset as usize;
        let end = start + t.count as usize * 8;
        let raw = blob
            .get(start..end)
            .ok_or_else(|| CliError::format(format!("{}: parameter data truncated", t.name)))?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        model
            .load_parameter(&t.name, &values)
            .map_err(|e| CliError::format(format!("checkpoint parameter {}: {e}", t.name)))?;
        loaded.insert(t.name.clone());
    }
    for (name, _) in model.named_parameters() {
        if !loaded.contains(&name) {
            return Err(CliError::format(format!("checkpoint is missing parameter {name}")));
        }
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<DegradationModel> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrsim_core::Tensor;

    fn model() -> DegradationModel {
        let mut cfg = NetConfig::desk(4);
        cfg.channels = 6;
        cfg.num_resblocks = 2;
        DegradationModel::new(cfg, 33).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = model_to_bytes(&m);
        let back = model_from_bytes(&bytes).unwrap();
        for ((n1, t1), (n2, t2)) in m.named_parameters().iter().zip(back.named_parameters().iter()) {
            assert_eq!(n1, n2);
            let a: Vec<u64> = t1.to_vec().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = t2.to_vec().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "{n1}");
        }
        assert_eq!(m.config(), back.config());
        // Identical forward output, bitwise.
        let input = Tensor::from_vec(&[1, 1, 16, 16], vec![0.33; 256]).unwrap();
        let ya: Vec<u64> = m.forward(&input).unwrap().to_vec().iter().map(|v| v.to_bits()).collect();
        let yb: Vec<u64> = back.forward(&input).unwrap().to_vec().iter().map(|v| v.to_bits()).collect();
        assert_eq!(ya, yb);
    }

    #[test]
    fn wrong_magic_is_version_error() {
        let mut bytes = model_to_bytes(&model());
        bytes[0] = b'X';
        let err = model_from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, CliError::Format(_)));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn wrong_version_rejected() {
        let m = model();
        let bytes = model_to_bytes(&m);
        // Corrupt the version field inside the JSON header.
        let json_start = MAGIC.len() + 8;
        let text = String::from_utf8(bytes[json_start..].to_vec()).ok();
        drop(text);
        let mut tampered = Vec::new();
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&bytes[16..16 + header_len]).unwrap();
        let bad_json = json.replace("\"version\":1", "\"version\":9");
        tampered.extend_from_slice(MAGIC);
        tampered.extend_from_slice(&(bad_json.len() as u64).to_le_bytes());
        tampered.extend_from_slice(bad_json.as_bytes());
        tampered.extend_from_slice(&bytes[16 + header_len..]);
        let err = model_from_bytes(&tampered).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn truncated_blob_rejected() {
        let bytes = model_to_bytes(&model());
        let err = model_from_bytes(&bytes[..bytes.len() - 9]).unwrap_err();
        assert!(matches!(err, CliError::Format(_)));
    }

    #[test]
    fn rescaled_factors_survive_round_trip() {
        let m = model();
        let wide = m.rescaled(&[2.5]).unwrap();
        let back = model_from_bytes(&model_to_bytes(&wide)).unwrap();
        assert_eq!(back.config().bank.factors, vec![2.5]);
        assert_eq!(back.bank().kernel(0).grid(), wide.bank().kernel(0).grid());
    }
}
