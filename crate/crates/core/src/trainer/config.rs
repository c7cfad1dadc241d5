//! Experiment configuration, presets and the key-value file format.
//!
//! Every field has a key of the same name. A file may start from a preset
//! (`preset = desk` or `preset = paper`) and override single keys:
//!
//! ```text
//! preset = desk
//! seed = 11
//! salience = 1 1 0.2 0.45 0.2 0.2
//! alpha = 0.94
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::formats;
use crate::retriever::{DEFAULT_DIM, DEFAULT_NOISE};
use crate::rewards::{RewardConfig, DEFAULT_ALPHA, DEFAULT_TAU};
use crate::synthworld::{SalienceProfile, NUM_ATTRIBUTES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(LabError::InvalidConfig(format!("unknown preset {other:?} (valid: desk, paper)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub salience: SalienceProfile,
    pub retriever_dim: usize,
    pub retriever_noise: f64,
    pub hidden: usize,
    pub context_every_step: bool,
    /// Teacher-forcing epochs that produce the shared starting checkpoint.
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub beam_size: usize,
    /// Generated tokens per caption, EOS included, BOS excluded.
    pub max_len: usize,
    pub mined_m: usize,
    pub alpha: f64,
    pub tau: f64,
    pub disc_width: usize,
    pub disc_lr: f64,
    pub disc_pretrain_steps: usize,
    pub disc_batch: usize,
    pub clamp_negative_gt: bool,
    pub eval_every: usize,
    pub probe_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let desk = Self {
            seed: 7,
            n_train: 512,
            n_test: 128,
            salience: SalienceProfile([1.0, 1.0, 0.1, 0.45, 0.1, 0.1]),
            retriever_dim: DEFAULT_DIM,
            retriever_noise: DEFAULT_NOISE,
            hidden: 64,
            context_every_step: true,
            pretrain_epochs: 20,
            pretrain_lr: 0.1,
            epochs: 30,
            lr: 0.01,
            batch_size: 20,
            beam_size: 3,
            max_len: 16,
            mined_m: 4,
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            disc_width: 64,
            disc_lr: 0.1,
            disc_pretrain_steps: 500,
            disc_batch: 20,
            clamp_negative_gt: false,
            eval_every: 1,
            probe_steps: 500,
        };
        match preset {
            Preset::Desk => desk,
            Preset::Paper => Self {
                batch_size: 20,
                alpha: 0.94,
                epochs: 5,
                lr: 1e-6,
                pretrain_epochs: 2,
                ..desk
            },
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            alpha: self.alpha,
            tau: self.tau,
            unidirectional: false,
            scst_greedy_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.salience.validate()?;
        self.reward_config().validate()?;
        let positive = [
            ("n_train", self.n_train),
            ("n_test", self.n_test),
            ("retriever_dim", self.retriever_dim),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("beam_size", self.beam_size),
            ("disc_width", self.disc_width),
            ("disc_batch", self.disc_batch),
            ("eval_every", self.eval_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(LabError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.max_len < 2 {
            return Err(LabError::InvalidConfig("max_len must be at least 2".into()));
        }
        if self.n_test < 2 {
            return Err(LabError::InvalidConfig("n_test must be at least 2".into()));
        }
        if self.mined_m >= self.n_test.min(self.n_train) {
            return Err(LabError::InvalidConfig(format!(
                "mined_m {} must be smaller than both splits",
                self.mined_m
            )));
        }
        for (name, v) in [
            ("retriever_noise", self.retriever_noise),
            ("pretrain_lr", self.pretrain_lr),
            ("lr", self.lr),
            ("disc_lr", self.disc_lr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LabError::InvalidConfig(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    /// Applies `key = value` overrides. An optional `preset` key is applied
    /// first; unknown keys are errors.
    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut config = match kv.get("preset") {
            Some(p) => Self::preset(p.parse()?),
            None => Self::default(),
        };
        for (key, value) in kv {
            if key != "preset" {
                config.set(key, value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_key_values(&formats::parse_key_values(text)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| LabError::InvalidConfig(format!("bad value {value:?} for `{key}`")))
        }
        match key {
            "seed" => self.seed = p(key, value)?,
            "n_train" => self.n_train = p(key, value)?,
            "n_test" => self.n_test = p(key, value)?,
            "salience" => {
                let probs: Vec<f64> = value.split_whitespace().map(|v| p(key, v)).collect::<Result<_>>()?;
                self.salience = SalienceProfile(probs.try_into().map_err(|_| {
                    LabError::InvalidConfig(format!("salience needs {NUM_ATTRIBUTES} values"))
                })?);
            }
            "retriever_dim" => self.retriever_dim = p(key, value)?,
            "retriever_noise" => self.retriever_noise = p(key, value)?,
            "hidden" => self.hidden = p(key, value)?,
            "context_every_step" => self.context_every_step = p(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = p(key, value)?,
            "pretrain_lr" => self.pretrain_lr = p(key, value)?,
            "epochs" => self.epochs = p(key, value)?,
            "lr" => self.lr = p(key, value)?,
            "batch_size" => self.batch_size = p(key, value)?,
            "beam_size" => self.beam_size = p(key, value)?,
            "max_len" => self.max_len = p(key, value)?,
            "mined_m" => self.mined_m = p(key, value)?,
            "alpha" => self.alpha = p(key, value)?,
            "tau" => self.tau = p(key, value)?,
            "disc_width" => self.disc_width = p(key, value)?,
            "disc_lr" => self.disc_lr = p(key, value)?,
            "disc_pretrain_steps" => self.disc_pretrain_steps = p(key, value)?,
            "disc_batch" => self.disc_batch = p(key, value)?,
            "clamp_negative_gt" => self.clamp_negative_gt = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            "probe_steps" => self.probe_steps = p(key, value)?,
            other => return Err(LabError::InvalidConfig(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let sal: Vec<String> = self.salience.0.iter().map(f64::to_string).collect();
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("seed", self.seed.to_string());
        line("n_train", self.n_train.to_string());
        line("n_test", self.n_test.to_string());
        line("salience", sal.join(" "));
        line("retriever_dim", self.retriever_dim.to_string());
        line("retriever_noise", self.retriever_noise.to_string());
        line("hidden", self.hidden.to_string());
        line("context_every_step", self.context_every_step.to_string());
        line("pretrain_epochs", self.pretrain_epochs.to_string());
        line("pretrain_lr", self.pretrain_lr.to_string());
        line("epochs", self.epochs.to_string());
        line("lr", self.lr.to_string());
        line("batch_size", self.batch_size.to_string());
        line("beam_size", self.beam_size.to_string());
        line("max_len", self.max_len.to_string());
        line("mined_m", self.mined_m.to_string());
        line("alpha", self.alpha.to_string());
        line("tau", self.tau.to_string());
        line("disc_width", self.disc_width.to_string());
        line("disc_lr", self.disc_lr.to_string());
        line("disc_pretrain_steps", self.disc_pretrain_steps.to_string());
        line("disc_batch", self.disc_batch.to_string());
        line("clamp_negative_gt", self.clamp_negative_gt.to_string());
        line("eval_every", self.eval_every.to_string());
        line("probe_steps", self.probe_steps.to_string());
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Seed of the retriever tables, kept apart from the world stream.
    pub fn retriever_seed(&self) -> u64 {
        self.seed ^ 0x9e37_79b9_7f4a_7c15
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.seed = 99;
        c.salience = SalienceProfile([1.0, 1.0, 0.3, 0.45, 0.1, 0.0]);
        c.tau = 0.013;
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn paper_preset_values() {
        let c = ExperimentConfig::from_text("preset = paper\n").unwrap();
        assert_eq!((c.batch_size, c.alpha, c.epochs, c.lr), (20, 0.94, 5, 1e-6));
    }

    #[test]
    fn bad_keys_and_values_are_rejected() {
        assert!(ExperimentConfig::from_text("nonsense = 1").is_err());
        assert!(ExperimentConfig::from_text("seed = x").is_err());
        assert!(ExperimentConfig::from_text("alpha = 1.5").is_err());
        assert!(ExperimentConfig::from_text("preset = huge").is_err());
        assert!(ExperimentConfig::from_text("salience = 0.5 1 1 1 1 1").is_err());
    }
}
