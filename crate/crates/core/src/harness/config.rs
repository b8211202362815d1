use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::grpo::GrpoConfig;
use crate::policy::{DEFAULT_FILLERS, DEFAULT_MAX_LEN};
use crate::rewards::RewardConfig;

/// Current config schema. Files with another version are rejected.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sft,
    GrpoPlain,
    GrpoDifficultyAware,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Sft, Mode::GrpoPlain, Mode::GrpoDifficultyAware];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sft => "sft",
            Mode::GrpoPlain => "grpo_plain",
            Mode::GrpoDifficultyAware => "grpo_difficulty_aware",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Question counts and gold-answer priors of the two difficulty tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub easy: usize,
    pub hard: usize,
    pub easy_prior: f64,
    pub hard_prior: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            easy: 50,
            hard: 50,
            easy_prior: 0.9,
            hard_prior: 0.05,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.easy + self.hard == 0 {
            return Err(config("synthetic spec has no questions"));
        }
        for p in [self.easy_prior, self.hard_prior] {
            if !(p > 0.0 && p < 1.0) {
                return Err(config(format!("tier prior {p} must lie in (0, 1)")));
            }
        }
        if self.easy_prior == self.hard_prior {
            return Err(config("difficulty tiers need distinct priors"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// JSON Lines of multiple-choice samples; every sample gets a uniform answer prior.
    Dataset(PathBuf),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSpec::default())
    }
}

/// Shape and initial behaviour of the toy policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyInit {
    pub max_len: usize,
    pub n_fillers: usize,
    /// Probability of closing the think span at each reasoning position.
    pub think_close_prob: f64,
    /// Mass spread uniformly over the whole vocabulary at every position.
    pub noise: f64,
}

impl Default for PolicyInit {
    fn default() -> Self {
        PolicyInit {
            max_len: DEFAULT_MAX_LEN,
            n_fillers: DEFAULT_FILLERS,
            think_close_prob: 0.4,
            noise: 0.005,
        }
    }
}

impl PolicyInit {
    pub fn validate(&self) -> Result<()> {
        if self.max_len < 6 {
            return Err(config("max_len must fit the six structural tokens"));
        }
        if self.n_fillers == 0 {
            return Err(config("need at least one filler token"));
        }
        if !(self.think_close_prob > 0.0 && self.think_close_prob < 1.0) {
            return Err(config("think_close_prob must lie in (0, 1)"));
        }
        if !(self.noise > 0.0 && self.noise < 1.0) {
            return Err(config("noise must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Supervised baseline: likelihood ascent on one fixed gold response per question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftConfig {
    pub lr: f64,
    /// Filler tokens inside the think span of the gold template.
    pub think_len: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        SftConfig {
            lr: 1000.0,
            think_len: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub data: DataSource,
    pub grpo: GrpoConfig,
    pub rewards: RewardConfig,
    pub policy: PolicyInit,
    pub sft: SftConfig,
    pub steps: usize,
    pub eval_every: usize,
    /// Questions per GRPO step.
    pub batch_questions: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            mode: Mode::GrpoDifficultyAware,
            data: DataSource::default(),
            grpo: GrpoConfig {
                lr: 150.0,
                ..GrpoConfig::default()
            },
            rewards: RewardConfig::default(),
            policy: PolicyInit::default(),
            sft: SftConfig::default(),
            steps: 800,
            eval_every: 20,
            batch_questions: 8,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.steps == 0 {
            return Err(config("steps must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(config("eval_every must be at least 1"));
        }
        if self.batch_questions == 0 {
            return Err(config("batch_questions must be at least 1"));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        if !self.sft.lr.is_finite() || self.sft.lr < 0.0 {
            return Err(config("sft lr must be finite and >= 0"));
        }
        if self.sft.think_len + 6 > self.policy.max_len {
            return Err(config("sft template does not fit in max_len"));
        }
        self.grpo.validate()?;
        self.rewards.validate()?;
        self.policy.validate()
    }

    /// GRPO settings with the mode's resampling and reweighting switches applied.
    pub fn effective_grpo(&self) -> GrpoConfig {
        let aware = self.mode == Mode::GrpoDifficultyAware;
        GrpoConfig {
            seed: self.seed,
            resample: aware,
            reweight: aware,
            ..self.grpo
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"schema_version":1,"mode":"sft","steps":3}"#).unwrap();
        assert_eq!(cfg.mode, Mode::Sft);
        assert_eq!(cfg.steps, 3);
        assert_eq!(cfg.batch_questions, 8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig {
            steps: 0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.steps = 1;
        cfg.schema_version = 2;
        assert!(cfg.validate().is_err());
        cfg.schema_version = SCHEMA_VERSION;
        cfg.data = DataSource::Synthetic(SyntheticSpec {
            hard_prior: 0.9,
            ..SyntheticSpec::default()
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_switches() {
        let mut cfg = ExperimentConfig::default();
        cfg.mode = Mode::GrpoPlain;
        let g = cfg.effective_grpo();
        assert!(!g.resample && !g.reweight);
        cfg.mode = Mode::GrpoDifficultyAware;
        let g = cfg.effective_grpo();
        assert!(g.resample && g.reweight);
    }
}
