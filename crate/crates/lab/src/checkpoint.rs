//! Model checkpoints: JSON with the architecture, its dimensions, and the
//! flat parameter vector as base64 of little-endian `f64`s.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rrm_core::models::{Arch, GnnConfig, GnnModel, MlpModel, Model, ModelParams, PowerModel, Standardizer};
use rrm_core::SeedKey;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const CHECKPOINT_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ModelDims {
    Mlp { k: usize, hidden: Vec<usize>, standardizer: Standardizer },
    Mpgnn { config: GnnConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u64,
    pub dims: ModelDims,
    pub init_key: SeedKey,
    pub param_count: usize,
    pub params_b64: String,
}

pub fn encode_params(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_params(text: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD.decode(text).map_err(|e| LabError::config(format!("params_b64: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(LabError::config(format!(
            "params_b64 holds {} bytes, expected {} parameters",
            bytes.len(),
            expected
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        let dims = match model {
            Model::Mlp(m) => ModelDims::Mlp { k: m.k(), hidden: m.hidden().to_vec(), standardizer: m.standardizer().clone() },
            Model::Gnn(g) => ModelDims::Mpgnn { config: g.config().clone() },
        };
        let params = model.params();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            dims,
            init_key: params.init_key,
            param_count: params.values.len(),
            params_b64: encode_params(&params.values),
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(LabError::config(format!("unsupported checkpoint format_version {}", self.format_version)));
        }
        let values = decode_params(&self.params_b64, self.param_count)?;
        Ok(match &self.dims {
            ModelDims::Mlp { k, hidden, standardizer } => {
                let params = ModelParams {
                    arch: Arch::Mlp,
                    layer_specs: MlpModel::layer_specs(*k, hidden),
                    values,
                    init_key: self.init_key,
                };
                Model::Mlp(MlpModel::from_parts(*k, hidden.clone(), standardizer.clone(), params)?)
            }
            ModelDims::Mpgnn { config } => {
                let params = ModelParams { arch: Arch::Mpgnn, layer_specs: config.layer_specs(), values, init_key: self.init_key };
                Model::Gnn(GnnModel::from_parts(config.clone(), params)?)
            }
        })
    }
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&Checkpoint::from_model(model)).expect("checkpoint serializes");
    fs::write(path, text + "\n").map_err(|e| LabError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| LabError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    ckpt.to_model()
}
