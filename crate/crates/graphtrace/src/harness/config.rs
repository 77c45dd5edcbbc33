//! Declarative experiment configuration.
//!
//! One TOML file describes a whole experiment: what to generate, where to
//! send it, and where records land. Secrets never appear in configs; the
//! `auth_env` field names an environment variable read at send time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::taskgen::{
    canonical_context_length, Condition, PromptFormat, PromptStyle, CONSTANT_LONG_CONTEXT,
    METALEARNING_WALK_LEN,
};
use crate::topology::{Rule, Topology, TopologyKind};

use super::HarnessError;

/// How many chain-of-thought tokens the model may spend before answering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThinkingBudget {
    #[default]
    Unlimited,
    Capped(u32),
    /// The smallest budget some providers accept.
    Minimal,
    Disabled,
}

pub const MINIMAL_THINKING_TOKENS: u32 = 128;

impl ThinkingBudget {
    /// The wire value: `None` leaves the provider's default in place.
    pub fn wire_value(&self) -> Option<u32> {
        match self {
            ThinkingBudget::Unlimited => None,
            ThinkingBudget::Capped(n) => Some(*n),
            ThinkingBudget::Minimal => Some(MINIMAL_THINKING_TOKENS),
            ThinkingBudget::Disabled => Some(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            backoff_base_ms: 250,
        }
    }
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_in_flight() -> usize {
    4
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_true() -> bool {
    true
}

/// A chat-completion endpoint. `auth_env` names the environment variable
/// holding the API key; if unset or empty, requests go out unauthenticated
/// (local endpoints).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub auth_env: String,
    #[serde(default = "default_true")]
    pub supports_prefill: bool,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub thinking_budget: ThinkingBudget,
    #[serde(default)]
    pub retry: RetryPolicy,
}

/// How the walk length is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ContextLengthMode {
    /// Look up the bundled optimal-length table by model key.
    Table1 {
        /// Table row to use; defaults to the endpoint model name.
        model_key: Option<String>,
    },
    /// The constant long-context setting (1500 words or pairs).
    #[serde(rename = "constant_1500")]
    Constant1500,
    /// A caller-chosen length.
    Explicit { value: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTriple {
    pub walk: u64,
    pub words: u64,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub size: usize,
}

/// The declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub topology: TopologySpec,
    pub condition: Condition,
    #[serde(default)]
    pub rule: Option<Rule>,
    pub n_replicates: usize,
    pub context_length: ContextLengthMode,
    /// Explicit seeds, honored when running a single replicate; replicated
    /// runs derive per-replicate seeds from the experiment id.
    #[serde(default)]
    pub seeds: Option<SeedTriple>,
    #[serde(default)]
    pub n_shots: Option<usize>,
    #[serde(default)]
    pub prompt_style: Option<PromptStyle>,
    /// Optional path to a custom wordlist file.
    #[serde(default)]
    pub wordlist: Option<PathBuf>,
    pub output: PathBuf,
    /// Infra-failure fraction tolerated before the run exits nonzero.
    #[serde(default)]
    pub max_failure_rate: f64,
    /// Score endpoint failures as incorrect instead of excluding them from
    /// the accuracy denominator.
    #[serde(default)]
    pub count_failures_as_incorrect: bool,
    pub endpoint: ModelEndpoint,
    /// Judge endpoint for autorating state-space descriptions.
    #[serde(default)]
    pub judge: Option<ModelEndpoint>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn topology(&self) -> Result<Topology, HarnessError> {
        Topology::new(self.topology.kind, self.topology.size)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn prompt_style(&self) -> PromptStyle {
        self.prompt_style.unwrap_or(PromptStyle::Prefill)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let config_err = |msg: String| Err(HarnessError::Config(msg));
        if self.experiment_id.trim().is_empty() {
            return config_err("experiment_id must be non-empty".into());
        }
        if self.n_replicates == 0 {
            return config_err("n_replicates must be at least 1".into());
        }
        let topology = self.topology()?;
        match self.condition {
            Condition::Awm | Condition::AwmExplicit | Condition::AwmMetalearning
            | Condition::AwmHints => {
                let Some(rule) = self.rule else {
                    return config_err(format!(
                        "condition {:?} requires a rule",
                        self.condition
                    ));
                };
                if !rule.applicable_to(topology.kind) {
                    return config_err(format!(
                        "rule {rule:?} is not applicable to {:?} topologies",
                        topology.kind
                    ));
                }
            }
            Condition::Autorater => {
                return config_err("autorater prompts are built by scoring, not experiments".into())
            }
            _ => {}
        }
        if matches!(
            self.condition,
            Condition::AwmExplicit | Condition::AwmMetalearning | Condition::DescribeStateSpace
        ) && topology.kind != TopologyKind::Grid
        {
            return config_err(format!(
                "condition {:?} requires a grid topology",
                self.condition
            ));
        }
        if self.condition.uses_prefill(self.prompt_style()) && !self.endpoint.supports_prefill {
            return config_err(format!(
                "condition {:?} needs a prefilled response but the endpoint does not support prefill",
                self.condition
            ));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return config_err("max_failure_rate must be within [0, 1]".into());
        }
        if self.endpoint.max_in_flight == 0 {
            return config_err("endpoint.max_in_flight must be at least 1".into());
        }
        if self.endpoint.retry.max_attempts == 0 {
            return config_err("endpoint.retry.max_attempts must be at least 1".into());
        }
        // fail early on unknown table keys rather than at replicate 0
        self.resolve_context_length()?;
        Ok(())
    }

    /// The walk length for this experiment, in words (grids) or pairs
    /// (lines). Conditions without a walk resolve to their fixed lengths.
    pub fn resolve_context_length(&self) -> Result<usize, HarnessError> {
        let topology = self.topology()?;
        match self.condition {
            Condition::AwmExplicit => return Ok(0),
            Condition::AwmMetalearning => return Ok(METALEARNING_WALK_LEN),
            _ => {}
        }
        match &self.context_length {
            ContextLengthMode::Table1 { model_key } => {
                let key = model_key.as_deref().unwrap_or(&self.endpoint.model);
                let format = match self.condition {
                    Condition::InstructionNtp | Condition::DescribeStateSpace => {
                        PromptFormat::Instruction
                    }
                    _ => PromptFormat::Prefill,
                };
                canonical_context_length(key, format, &topology)
                    .map_err(|e| HarnessError::Config(e.to_string()))
            }
            ContextLengthMode::Constant1500 => Ok(CONSTANT_LONG_CONTEXT),
            ContextLengthMode::Explicit { value } => {
                if *value == 0 {
                    Err(HarnessError::Config(
                        "explicit context length must be at least 1".into(),
                    ))
                } else {
                    Ok(*value)
                }
            }
        }
    }
}
