//! Single JSON configuration with one section per pipeline stage.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grpo::{GrpoConfig, RewardConfig};
use crate::io;
use crate::metrics::{DEFAULT_JUDGE_MARGIN, DEFAULT_LONG_PLAY_THRESHOLD};
use crate::policy::PretrainConfig;
use crate::scorer::TrainConfig;
use crate::seed::derive_seed;
use crate::simulator::SimConfig;

pub const ENV_PREFIX: &str = "RERANKLAB_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Length of reranked pages.
    pub list_k: usize,
    /// Fraction of queries held out from policy training for evaluation.
    pub eval_fraction: f64,
    pub judge_margin: f64,
    pub long_threshold: f64,
    pub split_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            list_k: 10,
            eval_fraction: 0.2,
            judge_margin: DEFAULT_JUDGE_MARGIN,
            long_threshold: DEFAULT_LONG_PLAY_THRESHOLD,
            split_seed: 23,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.ks.is_empty() || self.ks.contains(&0) {
            bad.push("eval.ks must be non-empty and >= 1".to_owned());
        }
        if self.list_k < 1 {
            bad.push("eval.list_k must be >= 1".to_owned());
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            bad.push("eval.eval_fraction must be in (0,1)".to_owned());
        }
        if !(self.judge_margin >= 0.0) {
            bad.push("eval.judge_margin must be >= 0".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub simulator: SimConfig,
    pub scorer: TrainConfig,
    /// Base policy fit to logged behavior.
    pub base: PretrainConfig,
    /// Stage I, continued from the base policy.
    pub pretrain: PretrainConfig,
    pub grpo: GrpoConfig,
    pub reward: RewardConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            simulator: SimConfig::default(),
            scorer: TrainConfig::default(),
            base: PretrainConfig {
                epochs: 30,
                seed: 19,
                ..PretrainConfig::default()
            },
            pretrain: PretrainConfig {
                epochs: 30,
                ..PretrainConfig::default()
            },
            grpo: GrpoConfig::default(),
            reward: RewardConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let sections: [(&str, Result<()>); 7] = [
            ("simulator", self.simulator.validate()),
            ("scorer", self.scorer.validate()),
            ("base", self.base.validate()),
            ("pretrain", self.pretrain.validate()),
            ("grpo", self.grpo.validate()),
            ("reward", self.reward.validate()),
            ("eval", self.eval.validate()),
        ];
        for (name, r) in sections {
            match r {
                Ok(()) => {}
                Err(Error::InvalidConfig(v)) => bad.extend(v.into_iter().map(|m| format!("{name}: {m}"))),
                Err(e) => bad.push(format!("{name}: {e}")),
            }
        }
        if self.base.d_h != self.pretrain.d_h || self.base.tau != self.pretrain.tau {
            bad.push("pretrain continues from base: d_h and tau must match".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }

    /// Re-seeds every stage from one master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.simulator.seed = derive_seed(seed, &["simulator"]);
        self.scorer.seed = derive_seed(seed, &["scorer"]);
        self.base.seed = derive_seed(seed, &["base"]);
        self.pretrain.seed = derive_seed(seed, &["pretrain"]);
        self.grpo.seed = derive_seed(seed, &["grpo"]);
        self.eval.split_seed = derive_seed(seed, &["eval"]);
        self
    }

    /// Applies `RERANKLAB_<SECTION>__<FIELD>=<value>` overrides. Values are
    /// parsed as JSON, falling back to a plain string.
    pub fn with_env_overrides<I>(self, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut tree = serde_json::to_value(&self)?;
        let mut touched = false;
        for (key, raw) in vars {
            let Some(path) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let Some((section, field)) = path.split_once("__") else {
                continue;
            };
            let (section, field) = (section.to_lowercase(), field.to_lowercase());
            let slot = tree
                .get_mut(&section)
                .and_then(|s| s.get_mut(&field))
                .ok_or_else(|| Error::InvalidConfig(vec![format!("{key}: no config field {section}.{field}")]))?;
            *slot = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            touched = true;
        }
        if !touched {
            return Ok(self);
        }
        serde_json::from_value(tree).map_err(|e| Error::InvalidConfig(vec![format!("environment override: {e}")]))
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        io::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}
