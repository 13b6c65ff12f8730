//! Declarative experiment files (TOML or JSON).

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::presets::{self, Process, Scenario, Target};
use crate::inar::{ModelSpec, TriangularSpec};
use crate::limits::Theorem;

/// Largest accepted tolerance.
pub const MAX_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("preset '{preset}' has no parameter '{param}'")]
    UnknownParam { preset: String, param: String },
    #[error("n_list must be non-empty")]
    EmptyHorizons,
    #[error("n_list must be strictly increasing positive integers")]
    UnorderedHorizons,
    #[error("tolerance {0} outside (0, 1e-6]")]
    Tolerance(f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Exact laws at each horizon.
    Exact,
    /// Empirical laws against the exact ones.
    Simulate,
    /// Numerical hypothesis checks along `n_list`.
    LimitCheck,
    /// Randomized bound certificates.
    BoundsSweep,
    /// Distance of the exact law to the limit at each horizon.
    Convergence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Monte Carlo settings; the horizon comes from `n_list`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_hint: Option<NonZeroUsize>,
}

/// Either a named preset with parameters or inline schedules.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangular: Option<TriangularSpec>,
    /// Overrides the preset target; required for inline convergence runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<Theorem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl ExperimentConfig {
    /// Parses JSON when the text starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_list.is_empty() {
            return Err(ConfigError::EmptyHorizons);
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::UnorderedHorizons);
        }
        if !(self.tolerance > 0.0 && self.tolerance <= MAX_TOLERANCE) {
            return Err(ConfigError::Tolerance(self.tolerance));
        }
        if self.experiment == Experiment::Simulate {
            match &self.mc {
                None => return Err(ConfigError::Invalid("simulate needs an [mc] section".into())),
                Some(mc) if mc.replicates == 0 => {
                    return Err(ConfigError::Invalid("mc.replicates must be at least 1".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolves the model section into a scenario.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let m = &self.model;
        let sources = [m.preset.is_some(), m.inline.is_some(), m.triangular.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(ConfigError::Invalid("model needs exactly one of preset, inline, triangular".into()));
        }
        if m.preset.is_none() && !m.params.is_empty() {
            return Err(ConfigError::Invalid("params only apply to presets".into()));
        }
        let mut scenario = if let Some(name) = &m.preset {
            presets::build_preset(name, &m.params, self.tolerance)?
        } else if let Some(model) = &m.inline {
            Scenario {
                name: model.name.clone(),
                process: Process::Inar { model: model.clone() },
                target: None,
                theorem: Theorem::T41,
            }
        } else {
            Scenario {
                name: "triangular".into(),
                process: Process::Triangular { spec: m.triangular.clone().expect("checked") },
                target: None,
                theorem: Theorem::T43,
            }
        };
        if let Some(target) = &m.target {
            scenario.target = Some(target.clone());
        }
        if let Some(theorem) = m.theorem {
            scenario.theorem = theorem;
        }
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THM31: &str = r#"
experiment = "convergence"
n_list = [10, 100]
tolerance = 1e-10

[model]
preset = "thm31"
params = { lambda = 1.0 }

[output]
format = "json"
"#;

    #[test]
    fn parses_toml_preset() {
        let cfg = ExperimentConfig::parse(THM31).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment, Experiment::Convergence);
        assert_eq!(cfg.output.format, Format::Json);
        assert_eq!(cfg.scenario().unwrap().name, "thm31");
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::parse(THM31).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn parses_inline_model() {
        let text = r#"
experiment = "exact"
n_list = [3]

[model.inline]
name = "toy"
rho = { kind = "constant", value = 0.5 }
immigration = { kind = "poisson", decay = { scale = 1.0, exponent = 0.0 } }

[model.target]
kind = "poisson"
lambda = 2.0
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let scenario = cfg.scenario().unwrap();
        assert_eq!(scenario.target, Some(Target::Poisson { lambda: 2.0 }));
    }

    #[test]
    fn validation_errors() {
        let mut cfg = ExperimentConfig::parse(THM31).unwrap();
        cfg.n_list.clear();
        assert_eq!(cfg.validate(), Err(ConfigError::EmptyHorizons));
        cfg.n_list = vec![10, 10];
        assert_eq!(cfg.validate(), Err(ConfigError::UnorderedHorizons));
        cfg.n_list = vec![10];
        cfg.tolerance = 1e-3;
        assert_eq!(cfg.validate(), Err(ConfigError::Tolerance(1e-3)));
        assert!(ExperimentConfig::parse("experiment = \"convergence\"\n[model]\nbogus = 1").is_err());
    }
}
