//! Run configuration: model variant, optimizer schedule, and the flat
//! `key=value` config-file format.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esim::ModelConfig;

/// Which scorer to train and evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Esim,
    Kesim,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Esim => "esim",
            Variant::Kesim => "kesim",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s.to_lowercase().as_str() {
            "esim" => Ok(Variant::Esim),
            "kesim" => Ok(Variant::Kesim),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Optimizer and loop settings. The full-scale profile uses batch 128; the
/// desk profile drops to 16.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_rate: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Steps between loss-log entries.
    pub log_every: usize,
    /// Keep this many sampled negatives per example (None keeps all).
    pub negatives: Option<usize>,
    /// Augment training contexts with retrieved responses.
    pub tesim: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.001,
            decay_rate: 0.96,
            decay_every: 5000,
            batch_size: 128,
            max_steps: 1000,
            seed: 0,
            variant: Variant::Esim,
            log_every: 50,
            negatives: None,
            tesim: false,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 16,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr0 <= 0.0 || self.decay_rate <= 0.0 {
            return Err(Error::Config("learning rate and decay must be positive".to_string()));
        }
        if self.decay_every == 0 || self.batch_size == 0 || self.max_steps == 0 || self.log_every == 0 {
            return Err(Error::Config("step counts must be positive".to_string()));
        }
        Ok(())
    }
}

/// Staircase schedule: `lr0 * decay_rate^(step / decay_every)`.
pub fn lr_schedule(step: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.decay_rate.powi((step / cfg.decay_every) as i32)
}

/// Everything a run needs, merged from profile defaults, an optional
/// config file, and CLI flags (in that order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Vocabulary frequency threshold.
    pub min_count: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            min_count: 1,
        }
    }
}

impl Config {
    pub fn desk() -> Self {
        Config {
            model: ModelConfig::desk(),
            train: TrainConfig::desk(),
            min_count: 1,
        }
    }

    /// Named profile lookup: `desk` or `paper`.
    pub fn profile(name: &str) -> Result<Config> {
        match name {
            "desk" => Ok(Config::desk()),
            "paper" => Ok(Config::default()),
            other => Err(Error::Config(format!("unknown profile {other:?} (expected desk or paper)"))),
        }
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value, got {raw:?}", path.display(), lineno + 1))
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(())
    }

    /// Sets one configuration key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "hidden" => self.model.hidden = parse(key, value)?,
            "mlp_hidden" => self.model.mlp_hidden = parse(key, value)?,
            "emb_dim_a" => self.model.emb_dim_a = parse(key, value)?,
            "emb_dim_b" => self.model.emb_dim_b = parse(key, value)?,
            "char_dim" => self.model.char_dim = parse(key, value)?,
            "char_emb_dim" => self.model.char_emb_dim = parse(key, value)?,
            "max_context_len" => self.model.max_context_len = parse(key, value)?,
            "max_knowledge_len" => self.model.max_knowledge_len = parse(key, value)?,
            "untie_knowledge_encoder" => self.model.untie_knowledge_encoder = parse(key, value)?,
            "finetune_pretrained" => self.model.finetune_pretrained = parse(key, value)?,
            "seed" => {
                let seed: u64 = parse(key, value)?;
                self.model.seed = seed;
                self.train.seed = seed;
            }
            "lr0" => self.train.lr0 = parse(key, value)?,
            "decay_rate" => self.train.decay_rate = parse(key, value)?,
            "decay_every" => self.train.decay_every = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "max_steps" => self.train.max_steps = parse(key, value)?,
            "log_every" => self.train.log_every = parse(key, value)?,
            "variant" => self.train.variant = value.parse()?,
            "negatives" => {
                self.train.negatives = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "tesim" => {
                self.train.tesim = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    other => return Err(Error::Config(format!("bad value {other:?} for tesim"))),
                }
            }
            "min_count" => self.min_count = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be >= 1".to_string()));
        }
        Ok(())
    }
}
