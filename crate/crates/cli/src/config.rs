//! Run configuration: one TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pngbert::encoder::ModelConfig;
use pngbert::pretrain::{AdamConfig, EvalMode, TrainConfig};
use pngbert::sequence::MaskingPolicy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// consistent, plain, g2p or p2g
    pub policy: String,
    pub max_len: usize,
    pub paths: Paths,
    pub build: BuildSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub finetune: FinetuneSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub lexicon: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub subwords: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub supervised: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSection {
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub ff_size: usize,
    pub max_positions: usize,
    pub dropout_rate: f64,
    pub word_position: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub num_steps: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub clip_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    pub trainable_top_layers: usize,
    pub batch_size: usize,
    pub num_steps: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// mlm, g2p or p2g
    pub mode: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            policy: "consistent".into(),
            max_len: 128,
            paths: Paths::default(),
            build: BuildSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            finetune: FinetuneSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl Default for BuildSection {
    fn default() -> Self {
        BuildSection { vocab_size: 256 }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::desk(0);
        ModelSection {
            num_layers: d.num_layers,
            hidden_size: d.hidden_size,
            num_heads: d.num_heads,
            ff_size: d.ff_size,
            max_positions: d.max_positions,
            dropout_rate: d.dropout_rate,
            word_position: d.word_position,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            batch_size: t.batch_size,
            num_steps: t.num_steps,
            peak_lr: t.peak_lr,
            warmup_steps: t.warmup_steps,
            clip_norm: t.adam.clip_norm,
        }
    }
}

impl Default for FinetuneSection {
    fn default() -> Self {
        FinetuneSection {
            trainable_top_layers: 2,
            batch_size: 16,
            num_steps: 500,
            peak_lr: 1e-2,
            warmup_steps: 25,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { mode: "mlm".into() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the resolved config next to the outputs as `<command>.config.toml`.
    pub fn emit(&self, command: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(format!("{command}.config.toml"));
        std::fs::write(&path, self.to_toml())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn policy(&self) -> Result<MaskingPolicy> {
        match MaskingPolicy::from_name(&self.policy) {
            Some(p) => Ok(p),
            None => bail!(pngbert::Error::Config(format!(
                "unknown policy `{}` (expected consistent, plain, g2p or p2g)",
                self.policy
            ))),
        }
    }

    pub fn eval_mode(&self) -> Result<EvalMode> {
        match EvalMode::from_name(&self.eval.mode) {
            Some(m) => Ok(m),
            None => bail!(pngbert::Error::Config(format!(
                "unknown eval mode `{}` (expected mlm, g2p or p2g)",
                self.eval.mode
            ))),
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            num_layers: m.num_layers,
            hidden_size: m.hidden_size,
            num_heads: m.num_heads,
            ff_size: m.ff_size,
            vocab_size,
            max_positions: m.max_positions,
            dropout_rate: m.dropout_rate,
            word_position: m.word_position,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            batch_size: t.batch_size,
            num_steps: t.num_steps,
            peak_lr: t.peak_lr,
            warmup_steps: t.warmup_steps,
            seed: self.seed,
            max_len: self.max_len,
            policy: self.policy()?,
            adam: AdamConfig {
                clip_norm: t.clip_norm,
                ..AdamConfig::default()
            },
        })
    }

    pub fn finetune_config(&self) -> Result<TrainConfig> {
        let f = &self.finetune;
        Ok(TrainConfig {
            batch_size: f.batch_size,
            num_steps: f.num_steps,
            peak_lr: f.peak_lr,
            warmup_steps: f.warmup_steps,
            ..self.train_config()?
        })
    }

    pub fn subwords_path(&self) -> PathBuf {
        self.paths
            .subwords
            .clone()
            .unwrap_or_else(|| self.out_dir.join("subwords.bpe"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("model.ckpt"))
    }
}

/// Returns the configured path or a config error naming the missing key.
pub fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    match path {
        Some(p) => Ok(p.clone()),
        None => bail!(pngbert::Error::Config(format!(
            "missing `paths.{key}` (set it in the config or pass --{key})"
        ))),
    }
}
