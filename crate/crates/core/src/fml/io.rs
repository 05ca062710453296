//! Model file: `b"FMLM"`, a little-endian `u64` header length, the JSON
//! header, then every parameter as a little-endian `f64` in flat layer
//! order (row-major weights, then biases).

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::{param_count, FlowMapModel, Normalization};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"FMLM";
pub const MODEL_VERSION: u32 = 1;
const ACTIVATION: &str = "tanh";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub version: u32,
    #[serde(rename = "n_V")]
    pub n_v: usize,
    pub n_gamma: usize,
    #[serde(rename = "n_M")]
    pub n_m: usize,
    pub layer_widths: Vec<usize>,
    pub activation: String,
    pub dt: Option<f64>,
    /// The network output is an increment over the newest window entry.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub residual: bool,
    pub normalization: NormalizationJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationJson {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn encode_model(model: &FlowMapModel) -> Vec<u8> {
    let header = ModelHeader {
        version: MODEL_VERSION,
        n_v: model.n_v,
        n_gamma: model.n_gamma,
        n_m: model.n_m,
        layer_widths: model.widths.clone(),
        activation: ACTIVATION.into(),
        dt: model.dt,
        residual: model.residual,
        normalization: NormalizationJson {
            mean: model.norm.mean.clone(),
            std: model.norm.std.clone(),
        },
    };
    let json = serde_json::to_vec(&header).expect("model header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 8 * model.params.len());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

/// Parses only the magic and JSON header.
pub fn decode_model_header(path: &Path, bytes: &[u8]) -> Result<(ModelHeader, usize)> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            path: path.into(),
            len: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != MODEL_MAGIC {
        return Err(Error::MagicMismatch {
            path: path.into(),
            expected: MODEL_MAGIC,
            found,
        });
    }
    let hlen = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let end = 12u64.checked_add(hlen).filter(|e| *e <= bytes.len() as u64).ok_or(Error::Truncated {
        path: path.into(),
        len: bytes.len(),
    })? as usize;
    let raw: Value = serde_json::from_slice(&bytes[12..end])
        .map_err(|e| Error::Data(format!("{}: malformed model header: {e}", path.display())))?;
    if let Some(v) = raw.get("version").and_then(Value::as_u64) {
        if v != MODEL_VERSION as u64 {
            return Err(Error::VersionMismatch {
                path: path.into(),
                expected: MODEL_VERSION,
                found: v as u32,
            });
        }
    }
    let header: ModelHeader = serde_json::from_value(raw)
        .map_err(|e| Error::Data(format!("{}: malformed model header: {e}", path.display())))?;
    if header.activation != ACTIVATION {
        return Err(Error::Data(format!(
            "{}: unsupported activation {:?}",
            path.display(),
            header.activation
        )));
    }
    Ok((header, end))
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> Result<FlowMapModel> {
    let (h, start) = decode_model_header(path, bytes)?;
    let dim_err = |detail: String| Error::DimensionMismatch {
        path: path.into(),
        detail,
    };
    let w = &h.layer_widths;
    if w.len() < 2 || w.contains(&0) {
        return Err(dim_err(format!("layer widths {w:?}")));
    }
    if w[0] != (h.n_m + 1) * h.n_v + h.n_gamma || *w.last().unwrap() != h.n_v {
        return Err(dim_err(format!(
            "layer widths {w:?} incompatible with n_V = {}, n_gamma = {}, n_M = {}",
            h.n_v, h.n_gamma, h.n_m
        )));
    }
    let n_params = param_count(w);
    let payload = bytes.len() - start;
    if payload != 8 * n_params {
        return Err(dim_err(format!(
            "widths {w:?} need {n_params} parameters ({} bytes), payload has {payload} bytes",
            8 * n_params
        )));
    }
    let params = bytes[start..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let norm = Normalization {
        mean: h.normalization.mean,
        std: h.normalization.std,
    };
    let mut m = FlowMapModel::from_parts(h.n_v, h.n_gamma, h.n_m, h.layer_widths, params, norm)
        .map_err(|e| dim_err(e.to_string()))?;
    m.set_dt(h.dt);
    m.set_residual(h.residual);
    Ok(m)
}

pub fn save_model(model: &FlowMapModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<FlowMapModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(path, &bytes)
}

pub fn read_model_header(path: &Path) -> Result<ModelHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model_header(path, &bytes).map(|(h, _)| h)
}
