//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::MAX_EXT_K;
use crate::diffusion::{DiffusionConfig, LrDecay, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, ModelConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub betas: [f64; 2],
    pub eps: f64,
    pub clip_norm: f64,
    pub lr_decay: LrDecay,
    pub min_lr_ratio: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub val_draws: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        OptimizerConfig {
            lr: t.optimizer.lr,
            betas: t.optimizer.betas,
            eps: t.optimizer.eps,
            clip_norm: t.optimizer.clip_norm,
            lr_decay: t.lr_decay,
            min_lr_ratio: t.min_lr_ratio,
            batch_size: t.batch_size,
            total_steps: t.total_steps,
            eval_every: t.eval_every,
            patience: t.patience,
            val_draws: t.val_draws,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub ext_k: usize,
    pub paths: PathsConfig,
    pub schedule: DiffusionConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ext_k > MAX_EXT_K {
            return Err(Error::Config(format!("ext_k {} outside 0..={MAX_EXT_K}", self.ext_k)));
        }
        self.schedule.validate()?;
        self.model.validate()?;
        self.train_config(0).validate()
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let o = &self.optimizer;
        TrainConfig {
            total_steps: o.total_steps,
            batch_size: o.batch_size,
            eval_every: o.eval_every,
            patience: o.patience,
            val_draws: o.val_draws,
            seed,
            optimizer: AdamConfig {
                lr: o.lr,
                betas: o.betas,
                eps: o.eps,
                clip_norm: o.clip_norm,
            },
            lr_decay: o.lr_decay,
            min_lr_ratio: o.min_lr_ratio,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_roundtrip() {
        let c = RunConfig::from_toml(
            "seed = 3\next_k = 2\n[schedule]\nsteps = 20\n[model]\nhidden = 32\nheads = 2\n[optimizer]\nlr = 0.01\nlr_decay = \"constant\"\nbatch_size = 4\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.schedule.steps, 20);
        assert_eq!(c.model.hidden, 32);
        assert_eq!(c.optimizer.batch_size, 4);
        assert_eq!(c.optimizer.lr_decay, LrDecay::Constant);
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in ["ext_k = 5", "[schedule]\nsteps = 1", "[model]\nheads = 3", "[optimizer]\nlr = -1.0", "[optimizer]\nmin_lr_ratio = 2.0"] {
            let r = RunConfig::from_toml(text).and_then(|c| c.validate());
            assert!(matches!(r, Err(Error::Config(_))), "{text}");
        }
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
    }
}
