use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentSpec;
use crate::env::{EnvSpec, NoiseMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvFamilyName {
    Linear,
    IndependentGaussian,
    Neuron,
    TwoLayer,
}

/// `[env]` table. Unset variances take the family defaults:
/// linear 1/1, independent_gaussian 1/1, neuron 10/100, two_layer 1/100
/// (prior/noise); `hidden` defaults to 50.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub family: EnvFamilyName,
    pub actions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
}

impl EnvConfig {
    pub fn to_spec(&self) -> Result<EnvSpec> {
        let need_dim = || {
            self.dim
                .ok_or_else(|| Error::Config(format!("env.dim is required for {:?}", self.family)))
        };
        if self.hidden.is_some() && self.family != EnvFamilyName::TwoLayer {
            return Err(Error::Config("env.hidden only applies to two_layer".into()));
        }
        let spec = match self.family {
            EnvFamilyName::Linear => EnvSpec::Linear {
                dim: need_dim()?,
                actions: self.actions,
                prior_var: self.prior_var.unwrap_or(1.0),
                noise_var: self.noise_var.unwrap_or(1.0),
            },
            EnvFamilyName::IndependentGaussian => {
                if self.dim.is_some() {
                    return Err(Error::Config("env.dim does not apply to independent_gaussian".into()));
                }
                EnvSpec::IndependentGaussian {
                    actions: self.actions,
                    prior_var: self.prior_var.unwrap_or(1.0),
                    noise_var: self.noise_var.unwrap_or(1.0),
                }
            }
            EnvFamilyName::Neuron => EnvSpec::Neuron {
                dim: need_dim()?,
                actions: self.actions,
                prior_var: self.prior_var.unwrap_or(10.0),
                noise_var: self.noise_var.unwrap_or(100.0),
            },
            EnvFamilyName::TwoLayer => EnvSpec::TwoLayer {
                dim: need_dim()?,
                hidden: self.hidden.unwrap_or(50),
                actions: self.actions,
                prior_var: self.prior_var.unwrap_or(1.0),
                noise_var: self.noise_var.unwrap_or(100.0),
            },
        };
        spec.validate().map_err(|e| Error::Config(format!("env: {e}")))?;
        Ok(spec)
    }
}

fn default_true() -> bool {
    true
}

/// `[run]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Write the per-realization trace file in addition to the summary.
    #[serde(default = "default_true")]
    pub write_traces: bool,
}

/// `[search]` table for `min-models`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub eps_target: f64,
    pub grid: Vec<usize>,
    /// Periods averaged at the end of the horizon; 1 means the final period only.
    #[serde(default = "default_window")]
    pub trailing_window: usize,
}

fn default_window() -> usize {
    1
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("search.grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) || self.grid[0] == 0 {
            return Err(Error::Config("search.grid must be strictly ascending and positive".into()));
        }
        if !(self.eps_target > 0.0) {
            return Err(Error::Config("search.eps_target must be positive".into()));
        }
        if self.trailing_window == 0 {
            return Err(Error::Config("search.trailing_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// A whole experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
}

impl ExperimentConfig {
    pub fn new(env: EnvConfig, agents: Vec<AgentSpec>, run: RunConfig) -> Self {
        ExperimentConfig {
            env,
            agents,
            run,
            search: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        self.env.to_spec()
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env_spec()?;
        if self.run.horizon == 0 {
            return Err(Error::Config("run.horizon must be at least 1".into()));
        }
        if self.run.realizations == 0 {
            return Err(Error::Config("run.realizations must be at least 1".into()));
        }
        let mut labels = std::collections::HashSet::new();
        for agent in &self.agents {
            agent.validate(spec.family())?;
            if !labels.insert(agent.label()) {
                return Err(Error::Config(format!("duplicate agent label '{}'", agent.label())));
            }
        }
        if let Some(search) = &self.search {
            search.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[env]
family = "independent_gaussian"
actions = 5

[run]
horizon = 10
realizations = 3
seed = 7

[[agents]]
kind = "thompson"

[[agents]]
kind = "ensemble"
models = 4
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.agents.len(), 2);
        assert_eq!(c.run.noise_mode, NoiseMode::Fresh);
        assert!(c.run.write_traces);
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_fail_closed() {
        let bad = SAMPLE.replace("seed = 7", "seed = 7\nturbo = true");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("models = 4", "models = 4\ntemperature = 2.0");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("independent_gaussian", "cauchy");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn semantic_errors() {
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("horizon = 10", "horizon = 0")).is_err());
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("models = 4", "models = 0")).is_err());
        assert!(ExperimentConfig::from_toml_str(&SAMPLE.replace("actions = 5", "actions = 5\ndim = 3")).is_err());
        let dup = format!("{SAMPLE}\n[[agents]]\nkind = \"thompson\"\n");
        assert!(ExperimentConfig::from_toml_str(&dup).is_err());
        assert!(ExperimentConfig::from_path(Path::new("/definitely/missing.toml")).unwrap_err().is_config());
    }

    #[test]
    fn search_section() {
        let with = format!("{SAMPLE}\n[search]\neps_target = 0.05\ngrid = [1, 2, 4]\n");
        let c = ExperimentConfig::from_toml_str(&with).unwrap();
        assert_eq!(c.search.unwrap().trailing_window, 1);
        let bad = format!("{SAMPLE}\n[search]\neps_target = 0.05\ngrid = [4, 2]\n");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let empty = format!("{SAMPLE}\n[search]\neps_target = 0.05\ngrid = []\n");
        assert!(ExperimentConfig::from_toml_str(&empty).is_err());
    }
}
