use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ContextEncoder, RatingScale};
use crate::error::{Error, Result};
use crate::kernel::FactorModel;
use crate::trainers::Algorithm;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Versioned JSON document holding a trained model and what is needed to
/// encode contexts for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub scale: RatingScale,
    pub encoder: ContextEncoder,
    pub model: FactorModel,
}

impl ModelSnapshot {
    pub fn new(algorithm: Algorithm, model: FactorModel, encoder: ContextEncoder, scale: RatingScale) -> Self {
        ModelSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            algorithm,
            scale,
            encoder,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SNAPSHOT_SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::Validation(format!(
                    "unsupported snapshot schema_version {v}"
                )))
            }
            None => return Err(Error::Validation("snapshot lacks schema_version".into())),
        }
        let snap: ModelSnapshot = serde_json::from_value(value)?;
        if snap.encoder.dim() != snap.model.context_dim() {
            return Err(Error::Dimension {
                expected: snap.encoder.dim(),
                actual: snap.model.context_dim(),
            });
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
