use std::path::Path;

use serde::{Deserialize, Serialize};

use super::blstm::{Hyper, ModelParams};
use crate::alphabet::alphabet_hash;
use crate::error::{Error, Result};
use crate::ink::{OffStrokeFeature, DEFAULT_SPACING};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model together with the preprocessing it was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub v: u32,
    pub alphabet_hash: String,
    pub spacing: f64,
    pub off_stroke: OffStrokeFeature,
    pub hyper: Hyper,
    pub weights: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, spacing: f64, off_stroke: OffStrokeFeature) -> Self {
        Checkpoint {
            v: CHECKPOINT_VERSION,
            alphabet_hash: alphabet_hash(),
            spacing,
            off_stroke,
            hyper: params.hyper,
            weights: params.weights.clone(),
        }
    }

    pub fn with_defaults(params: &ModelParams) -> Self {
        Self::new(params, DEFAULT_SPACING, OffStrokeFeature::Delta)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let p = ModelParams { hyper: self.hyper, weights: self.weights.clone() };
        p.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(p)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.v != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", ck.v)));
        }
        let expected = alphabet_hash();
        if ck.alphabet_hash != expected {
            return Err(Error::AlphabetMismatch { expected, found: ck.alphabet_hash });
        }
        if !(ck.spacing > 0.0 && ck.spacing.is_finite()) {
            return Err(Error::Checkpoint(format!("invalid resampling spacing {}", ck.spacing)));
        }
        ck.params()?;
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
