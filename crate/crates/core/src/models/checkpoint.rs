//! Checkpoint files: a flat little-endian weight blob described by a JSON
//! sidecar carrying the architecture tag, config echo and parameter layout.

use super::{ModelConfig, ParamLayoutEntry, ParamSet, SurrogateModel};
use crate::datagen::DataError;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"DBCKPTV1";
const VERSION: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointSidecar {
    pub version: u64,
    pub architecture: String,
    pub config: ModelConfig,
    pub layout: Vec<ParamLayoutEntry>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub fn save_checkpoint(dir: &Path, stem: &str, model: &SurrogateModel, extra: serde_json::Value) -> Result<(), DataError> {
    let flat = model.params.flatten();
    let mut buf = Vec::with_capacity(24 + flat.len() * 8);
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for v in &flat {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(dir.join(format!("{stem}.bin")), &buf)?;

    let sidecar = CheckpointSidecar {
        version: VERSION,
        architecture: model.config.architecture.as_str().to_string(),
        config: model.config.clone(),
        layout: model.params.layout(),
        extra,
    };
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path, stem: &str) -> Result<(SurrogateModel, CheckpointSidecar), DataError> {
    let sidecar: CheckpointSidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    if bytes.len() < 24 {
        return Err(DataError::Format { offset: bytes.len() as u64, detail: "truncated checkpoint header".into() });
    }
    if bytes[..8] != CHECKPOINT_MAGIC {
        return Err(DataError::Format { offset: 0, detail: "bad checkpoint magic".into() });
    }
    let version = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if version != VERSION {
        return Err(DataError::Format { offset: 8, detail: format!("unsupported checkpoint version {version}") });
    }
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if bytes.len() != 24 + count * 8 {
        return Err(DataError::Format {
            offset: bytes.len() as u64,
            detail: format!("expected {} data bytes, found {}", count * 8, bytes.len() - 24),
        });
    }
    let flat: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(DataError::Numeric("checkpoint contains non-finite weights".into()));
    }

    // rebuild with the sidecar config, then overwrite the weights
    let mut model = SurrogateModel::new(sidecar.config.clone(), 0);
    expect_layout(&model.params, &sidecar.layout)?;
    model.params.unflatten(&flat)?;
    Ok((model, sidecar))
}

fn expect_layout(params: &ParamSet, layout: &[ParamLayoutEntry]) -> Result<(), DataError> {
    let actual = params.layout();
    if actual.len() != layout.len() {
        return Err(DataError::Numeric(format!(
            "checkpoint layout has {} entries, model needs {}",
            layout.len(),
            actual.len()
        )));
    }
    for (a, b) in actual.iter().zip(layout) {
        if a.name != b.name || a.shape != b.shape || a.offset != b.offset {
            return Err(DataError::Numeric(format!(
                "checkpoint layout mismatch at {}: {:?}@{} vs {:?}@{}",
                b.name, b.shape, b.offset, a.shape, a.offset
            )));
        }
    }
    Ok(())
}
