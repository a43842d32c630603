//! Pipeline configuration: TOML file with full defaults, plus the
//! reproducibility hash that guards checkpoint resumption.

use crate::distill::{DistillConfig, PromptTemplates};
use crate::equation::PiValue;
use crate::refine::{CombinatorialSearcher, RefineConfig};
use crate::numeric::parse_number_literal;
use crate::validate::CheckConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub llm: LlmSettings,
    pub checks: CheckSettings,
    pub refine: RefineSettings,
    pub prompts: PromptTemplates,
    pub pipeline: PipelineSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. The key
    /// itself never appears in config files.
    pub api_key_env: String,
    pub requests_per_minute: u32,
    pub fresh_temperature: f64,
    pub correction_temperature: f64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "MWP_API_KEY".into(),
            requests_per_minute: 60,
            fresh_temperature: 0.7,
            correction_temperature: 0.0,
            max_retries: 3,
            retry_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    /// Strict absolute answer tolerance, e.g. "1e-4".
    pub answer_tolerance: String,
    pub near_miss_ceiling: String,
    /// Rational literal for pi (datasets grade with 3.14), or "precise".
    pub pi: String,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            answer_tolerance: "1e-4".into(),
            near_miss_ceiling: "1e-2".into(),
            pi: "3.14".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineSettings {
    pub beam_width: usize,
    pub max_iterations: u32,
    pub conciseness_pass: bool,
    /// Operator budget of the combinatorial searcher.
    pub max_ops: usize,
    pub level_cap: usize,
    pub hit_cap: usize,
}

impl Default for RefineSettings {
    fn default() -> Self {
        RefineSettings {
            beam_width: 5,
            max_iterations: 5,
            conciseness_pass: true,
            max_ops: 4,
            level_cap: 4000,
            hit_cap: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    /// Problems per checkpoint batch during distillation.
    pub checkpoint_batch: usize,
    pub malformed_threshold: f64,
    pub concurrency: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            checkpoint_batch: 50,
            malformed_threshold: 0.01,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path} does not parse: {reason}")]
    Syntax { path: String, reason: String },
    #[error("invalid config value: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| ConfigError::Syntax {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.prompts.validate().map_err(ConfigError::Invalid)?;
        if self.refine.beam_width == 0 {
            return Err(ConfigError::Invalid("refine.beam_width must be at least 1".into()));
        }
        self.check_config()?;
        Ok(())
    }

    /// Hash over everything that affects which equations get accepted
    /// and harvested: prompts, tolerances and pi, and the refine
    /// parameters. Transport settings (endpoint, key variable, pacing)
    /// deliberately stay out.
    pub fn reproducibility_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            checks: &'a CheckSettings,
            refine: &'a RefineSettings,
            prompts: &'a PromptTemplates,
        }
        let canonical = serde_json::to_string(&Hashed {
            checks: &self.checks,
            refine: &self.refine,
            prompts: &self.prompts,
        })
        .expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        format!("{digest:x}")
    }

    pub fn check_config(&self) -> Result<CheckConfig, ConfigError> {
        let tolerance = parse_number_literal(&self.checks.answer_tolerance).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "checks.answer_tolerance `{}` is not a number",
                self.checks.answer_tolerance
            ))
        })?;
        let near_miss_ceiling =
            parse_number_literal(&self.checks.near_miss_ceiling).ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "checks.near_miss_ceiling `{}` is not a number",
                    self.checks.near_miss_ceiling
                ))
            })?;
        let pi = if self.checks.pi == "precise" {
            PiValue::Precise
        } else {
            PiValue::Exact(parse_number_literal(&self.checks.pi).ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "checks.pi `{}` is neither a number nor \"precise\"",
                    self.checks.pi
                ))
            })?)
        };
        Ok(CheckConfig {
            tolerance,
            near_miss_ceiling,
            pi,
        })
    }

    pub fn distill_config(&self) -> Result<DistillConfig, ConfigError> {
        Ok(DistillConfig {
            max_attempts: 3,
            max_corrections: 5,
            fresh_temperature: self.llm.fresh_temperature,
            correction_temperature: self.llm.correction_temperature,
            max_retries: self.llm.max_retries,
            retry_backoff_ms: self.llm.retry_backoff_ms,
            check: self.check_config()?,
        })
    }

    pub fn refine_config(&self, seed: u64) -> RefineConfig {
        RefineConfig {
            beam_width: self.refine.beam_width,
            max_iterations: self.refine.max_iterations,
            seed,
            conciseness_pass: self.refine.conciseness_pass,
        }
    }

    pub fn searcher(&self) -> Result<CombinatorialSearcher, ConfigError> {
        let mut searcher = CombinatorialSearcher::new(self.refine.max_ops);
        searcher.level_cap = self.refine.level_cap;
        searcher.hit_cap = self.refine.hit_cap;
        Ok(searcher.with_check(self.check_config()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    #[test]
    fn defaults_are_valid() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        let check = config.check_config().unwrap();
        assert_eq!(check.tolerance, BigRational::new(1.into(), 10_000.into()));
        assert_eq!(check.pi.literal().unwrap(), &BigRational::new(157.into(), 50.into()));
    }

    #[test]
    fn hash_tracks_reproducibility_relevant_fields_only() {
        let base = PipelineConfig::default();
        let mut transport_changed = base.clone();
        transport_changed.llm.endpoint = "http://localhost:9/v1".into();
        assert_eq!(base.reproducibility_hash(), transport_changed.reproducibility_hash());

        let mut pi_changed = base.clone();
        pi_changed.checks.pi = "precise".into();
        assert_ne!(base.reproducibility_hash(), pi_changed.reproducibility_hash());

        let mut prompt_changed = base.clone();
        prompt_changed.prompts.extract_knowledge = "different wording".into();
        assert_ne!(base.reproducibility_hash(), prompt_changed.reproducibility_hash());

        let mut width_changed = base;
        width_changed.refine.beam_width = 7;
        assert_ne!(width_changed.reproducibility_hash(), PipelineConfig::default().reproducibility_hash());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let parsed: PipelineConfig = toml::from_str(
            r#"
            [checks]
            pi = "precise"

            [refine]
            beam_width = 3
            "#,
        )
        .unwrap();
        assert_eq!(parsed.refine.beam_width, 3);
        assert_eq!(parsed.refine.max_iterations, 5);
        assert!(matches!(parsed.check_config().unwrap().pi, PiValue::Precise));
    }

    #[test]
    fn bad_tolerance_is_invalid() {
        let config = PipelineConfig {
            checks: CheckSettings {
                answer_tolerance: "tight".into(),
                ..CheckSettings::default()
            },
            ..PipelineConfig::default()
        };
        assert!(matches!(config.validate(), Err(ConfigError::Invalid(_))));
    }
}
