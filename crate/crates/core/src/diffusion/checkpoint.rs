//! JSON checkpoints: parameters plus everything needed to sample again.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::structure::AngleNormalizer;
use super::trainer::{DiffusionConfig, DiffusionModel, EpochRecord};
use crate::amino::AA_ORDER;
use crate::error::{Error, Result};
use crate::nn::{DenoiserKind, ModelConfig, ModelParams};

pub const CHECKPOINT_SCHEMA: &str = "pepforge-checkpoint/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub kind: DenoiserKind,
    pub model: ModelConfig,
    pub diffusion: DiffusionConfig,
    pub normalizer: Option<AngleNormalizer>,
    pub ext_k: usize,
    pub aa_order: String,
    pub seed: u64,
    pub steps_run: usize,
    /// ChaCha8 word position of the training stream, as a decimal string.
    pub rng_word_pos: String,
    pub history: Vec<EpochRecord>,
    pub params: serde_json::Value,
}

impl Checkpoint {
    pub fn from_model(
        m: &DiffusionModel,
        ext_k: usize,
        seed: u64,
        steps_run: usize,
        rng_word_pos: u128,
        history: Vec<EpochRecord>,
    ) -> Self {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            kind: m.kind(),
            model: m.denoiser.config.clone(),
            diffusion: m.diffusion.clone(),
            normalizer: m.normalizer.clone(),
            ext_k,
            aa_order: AA_ORDER.into(),
            seed,
            steps_run,
            rng_word_pos: rng_word_pos.to_string(),
            history,
            params: m.params.to_json_value(),
        }
    }

    pub fn to_model(&self) -> Result<DiffusionModel> {
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(Error::Format(format!("unknown checkpoint schema {:?}", self.schema)));
        }
        if self.aa_order != AA_ORDER {
            return Err(Error::Format(format!("checkpoint amino-acid order {:?}", self.aa_order)));
        }
        let denoiser = crate::nn::Denoiser::new(self.kind, self.model.clone())?;
        let mut params = denoiser.init_params(0)?;
        params.load_json_value(self.params.clone())?;
        DiffusionModel::from_parts(self.kind, self.model.clone(), self.diffusion.clone(), self.normalizer.clone(), params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Parameters only; used by tests comparing runs.
pub fn params_equal(a: &ModelParams, b: &ModelParams) -> bool {
    a.names() == b.names() && a.values == b.values
}
