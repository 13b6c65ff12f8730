//! Named scenarios with their limit targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ConfigError;
use crate::inar::{Decay, ImmigrationSchedule, ModelSpec, RhoSchedule, TriangularSpec};
use crate::laws::{self, IntensityMeasure};
use crate::limits::{self, FactorialLimitProfile, Theorem};

/// Highest `λ_j` the bounded compound Poisson preset accepts.
const MAX_BOUNDED_ORDER: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSchema {
    pub name: String,
    pub default: f64,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub theorem: Theorem,
    pub description: String,
    pub params: Vec<ParamSchema>,
}

fn param(name: &str, default: f64, description: &str) -> ParamSchema {
    ParamSchema { name: name.into(), default, description: description.into() }
}

/// Every built-in scenario, in a stable order.
pub fn preset_catalog() -> Vec<PresetInfo> {
    let bounded_params = (1..=MAX_BOUNDED_ORDER)
        .map(|j| {
            let default = match j {
                1 => 2.0,
                2 => 1.0,
                _ => 0.0,
            };
            param(&format!("lambda_{j}"), default, "limit of m_{n,j} / (j (1 - rho_n))")
        })
        .collect();
    vec![
        PresetInfo {
            name: "thm31".into(),
            theorem: Theorem::T31,
            description: "rho_n = 1 - 1/n, eps_n ~ Be(lambda/n); limit Po(lambda)".into(),
            params: vec![param("lambda", 1.0, "Poisson limit parameter, at most 1")],
        },
        PresetInfo {
            name: "thm41".into(),
            theorem: Theorem::T41,
            description: "rho_n = 1 - 1/(n+1), eps_n ~ Po(lambda/n); limit Po(lambda)".into(),
            params: vec![param("lambda", 1.0, "Poisson limit parameter")],
        },
        PresetInfo {
            name: "thm51-bounded".into(),
            theorem: Theorem::T51,
            description: "rho_n = 1 - 1/n, finitely supported eps_n realizing the lambda_j; limit CP(mu) with bounded mu"
                .into(),
            params: bounded_params,
        },
        PresetInfo {
            name: "dilog".into(),
            theorem: Theorem::T52,
            description: "rho_n = 1 - 1/n, P(eps_n = j) = 1/(n j (j+1)); limit CP(mu{j} = 1/j^2)".into(),
            params: vec![],
        },
        PresetInfo {
            name: "triangular-binomial".into(),
            theorem: Theorem::T43,
            description: "row n holds k_n = per_n * n copies of (delta_1, lambda/k_n); limit Po(lambda)".into(),
            params: vec![
                param("lambda", 1.0, "Poisson limit parameter"),
                param("per_n", 1.0, "row length per unit of n"),
            ],
        },
    ]
}

/// The limit law a scenario is compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    Poisson { lambda: f64 },
    CompoundPoisson { measure: IntensityMeasure },
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Target::Poisson { lambda } => format!("Po({lambda})"),
            Target::CompoundPoisson { measure } => format!("CP(mu on 1..={})", measure.support_len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Process {
    Inar { model: ModelSpec },
    Triangular { spec: TriangularSpec },
}

/// A process together with its limit and the theorem it illustrates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub process: Process,
    pub target: Option<Target>,
    pub theorem: Theorem,
}

fn near_critical(shift: f64) -> RhoSchedule {
    RhoSchedule::NearCritical { decay: Decay { scale: 1.0, shift, exponent: 1.0 } }
}

fn lookup(preset: &str, params: &BTreeMap<String, f64>) -> Result<impl Fn(&str) -> f64, ConfigError> {
    let info = preset_catalog()
        .into_iter()
        .find(|p| p.name == preset)
        .ok_or_else(|| ConfigError::UnknownPreset(preset.into()))?;
    for (key, value) in params {
        if !info.params.iter().any(|p| &p.name == key) {
            return Err(ConfigError::UnknownParam { preset: preset.into(), param: key.clone() });
        }
        if !value.is_finite() || *value < 0.0 {
            return Err(ConfigError::Invalid(format!("{preset}: parameter {key} = {value} must be finite and >= 0")));
        }
    }
    let mut values: BTreeMap<String, f64> = info.params.iter().map(|p| (p.name.clone(), p.default)).collect();
    values.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(move |name: &str| values[name])
}

/// Dilogarithm limit `μ{j} = 1/j²` stored below `window`, with the exact
/// total `π²/6` and the omitted mass bounded by `1/(window − 1)`.
pub fn dilog_target(window: usize) -> Result<IntensityMeasure, ConfigError> {
    let weights: Vec<f64> = (1..window).map(|j| 1.0 / (j as f64 * j as f64)).collect();
    let total = std::f64::consts::PI.powi(2) / 6.0;
    IntensityMeasure::with_tail(weights, Some(total), 1.0 / (window - 1) as f64)
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// Builds a named preset. `tolerance` fixes the truncation of infinite targets.
pub fn build_preset(preset: &str, params: &BTreeMap<String, f64>, tolerance: f64) -> Result<Scenario, ConfigError> {
    let get = lookup(preset, params)?;
    let scenario = |process, target, theorem| Scenario { name: preset.into(), process, target: Some(target), theorem };
    Ok(match preset {
        "thm31" => {
            let lambda = get("lambda");
            if lambda > 1.0 {
                return Err(ConfigError::Invalid("thm31: lambda must be at most 1 so that lambda/n <= 1".into()));
            }
            let model = ModelSpec::new(
                preset,
                near_critical(0.0),
                ImmigrationSchedule::Bernoulli { decay: Decay::harmonic(lambda) },
            );
            scenario(Process::Inar { model }, Target::Poisson { lambda }, Theorem::T31)
        }
        "thm41" => {
            let lambda = get("lambda");
            let model = ModelSpec::new(
                preset,
                near_critical(1.0),
                ImmigrationSchedule::Poisson { decay: Decay::harmonic(lambda) },
            );
            scenario(Process::Inar { model }, Target::Poisson { lambda }, Theorem::T41)
        }
        "thm51-bounded" => {
            let (model, measure) = bounded_cp((1..=MAX_BOUNDED_ORDER).map(|j| get(&format!("lambda_{j}"))).collect())?;
            scenario(Process::Inar { model }, Target::CompoundPoisson { measure }, Theorem::T51)
        }
        "dilog" => {
            let model = ModelSpec::new(
                preset,
                near_critical(0.0),
                ImmigrationSchedule::Dilog { decay: Decay::harmonic(1.0) },
            );
            let window = laws::window_for_tolerance(tolerance);
            if window > laws::MAX_SUPPORT {
                return Err(ConfigError::Invalid(format!(
                    "dilog: tolerance {tolerance:e} needs a window of {window} points (limit {})",
                    laws::MAX_SUPPORT
                )));
            }
            let measure = dilog_target(window)?;
            scenario(Process::Inar { model }, Target::CompoundPoisson { measure }, Theorem::T52)
        }
        "triangular-binomial" => {
            let lambda = get("lambda");
            let per_n = get("per_n");
            if per_n < 1.0 || per_n.fract() != 0.0 {
                return Err(ConfigError::Invalid("triangular-binomial: per_n must be a positive integer".into()));
            }
            let spec = TriangularSpec::Uniform { law: laws::dirac(1), lambda, per_n: per_n as usize };
            scenario(Process::Triangular { spec }, Target::Poisson { lambda }, Theorem::T43)
        }
        _ => unreachable!("catalog lookup succeeded"),
    })
}

/// Realizes a bounded profile `λ_1, …` (zero from some order on) with
/// `ρ_n = 1 − 1/n` and `P(ε_n = i) = c_i / (n + s)`, where
/// `c_i = i μ{i} − (i + 1) μ{i + 1}`; then `Σ_i c_i (i)_j = j λ_j`.
fn bounded_cp(lambdas: Vec<f64>) -> Result<(ModelSpec, IntensityMeasure), ConfigError> {
    let Some(zero) = lambdas.iter().position(|&l| l == 0.0) else {
        return Err(ConfigError::Invalid(format!(
            "thm51-bounded: some lambda_j with j <= {MAX_BOUNDED_ORDER} must be 0"
        )));
    };
    if lambdas[zero..].iter().any(|&l| l != 0.0) {
        return Err(ConfigError::Invalid("thm51-bounded: lambdas must stay 0 after the first 0".into()));
    }
    let profile = FactorialLimitProfile::bounded(lambdas[..=zero].to_vec(), zero + 1)
        .map_err(|e| ConfigError::Invalid(format!("thm51-bounded: {e}")))?;
    let estimate = limits::intensity_from_lambdas(&profile, zero + 1)
        .map_err(|e| ConfigError::Invalid(format!("thm51-bounded: {e}")))?;
    let mu = estimate.measure.weights().to_vec();
    let weights: Vec<f64> = (1..=mu.len())
        .map(|i| i as f64 * mu[i - 1] - (i + 1) as f64 * mu.get(i).copied().unwrap_or(0.0))
        .collect();
    if let Some(i) = weights.iter().position(|&c| c < -1e-12) {
        return Err(ConfigError::Invalid(format!(
            "thm51-bounded: profile needs P(eps = {}) < 0 in the built-in construction",
            i + 1
        )));
    }
    let weights: Vec<f64> = weights.into_iter().map(|c| c.max(0.0)).collect();
    let shift = (weights.iter().sum::<f64>() - 1.0).ceil().max(0.0);
    let model = ModelSpec::new(
        "thm51-bounded",
        near_critical(0.0),
        ImmigrationSchedule::Scaled { weights, decay: Decay { scale: 1.0, shift, exponent: 1.0 } },
    );
    Ok((model, estimate.measure))
}
