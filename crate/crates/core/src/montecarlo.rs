//! Reproducible simulation of INAR(1) sample paths.
//!
//! Replicate `i` draws from a ChaCha8 stream keyed by `(seed, i)` alone, so
//! the empirical law does not depend on how replicates are split across
//! threads.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inar::{ModelError, ModelSpec};
use crate::laws::{ImmigrationLaw, MAX_SUPPORT};
use crate::pmf::Pmf;

/// Below this value of `x · min(ρ, 1 − ρ)` binomials are drawn by inversion.
const INVERSION_LIMIT: f64 = 30.0;
/// Tabulation tolerance for Poisson immigration; draws beyond the table
/// continue the inversion exactly.
const TABLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("replicates must be at least 1")]
    NoReplicates,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("finite immigration law at step {0} has no located mass")]
    EmptyLaw(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replicates: usize,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_hint: Option<NonZeroUsize>,
}

impl SimConfig {
    pub fn new(replicates: usize, horizon: usize, seed: u64) -> Self {
        SimConfig { replicates, horizon, seed, worker_hint: None }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.worker_hint = NonZeroUsize::new(workers);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.replicates == 0 {
            return Err(SimError::NoReplicates);
        }
        if self.horizon == 0 {
            return Err(SimError::ZeroHorizon);
        }
        Ok(())
    }
}

/// The random stream of replicate `index` under `seed`.
pub fn replicate_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
enum Immigration {
    /// Cumulative table; draws landing in the unlocated tail are redrawn.
    Table { cdf: Vec<f64> },
    /// Poisson inversion seeded by a table, continued past its end.
    Poisson { rate: f64, cdf: Vec<f64>, last: f64 },
    /// `P(ε ≥ j) = scale / j`.
    Dilog { scale: f64 },
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn search(cdf: &[f64], u: f64) -> Option<usize> {
    let i = cdf.partition_point(|&c| c <= u);
    (i < cdf.len()).then_some(i)
}

impl Immigration {
    fn new(law: &ImmigrationLaw, step: usize) -> Result<Self, SimError> {
        Ok(match law {
            ImmigrationLaw::Finite { pmf } => {
                if pmf.tail_mass() >= 1.0 {
                    return Err(SimError::EmptyLaw(step));
                }
                Immigration::Table { cdf: cumulative(pmf.probs()) }
            }
            ImmigrationLaw::Poisson { rate } => {
                let pmf = law
                    .pmf(TABLE_TOLERANCE)
                    .map_err(|e| ModelError::Immigration { n: step, reason: e.to_string() })?;
                let cdf = cumulative(pmf.probs());
                let last = pmf.probs().last().copied().unwrap_or(0.0);
                Immigration::Poisson { rate: *rate, cdf, last }
            }
            ImmigrationLaw::Dilog { scale } => Immigration::Dilog { scale: *scale },
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            Immigration::Table { cdf } => loop {
                if let Some(i) = search(cdf, rng.random::<f64>()) {
                    return i as u64;
                }
            },
            Immigration::Poisson { rate, cdf, last } => {
                let u = rng.random::<f64>();
                if let Some(i) = search(cdf, u) {
                    return i as u64;
                }
                // Past the table: keep accumulating the Poisson recurrence.
                let mut acc = cdf.last().copied().unwrap_or(0.0);
                let mut p = *last;
                let mut j = cdf.len() as u64;
                loop {
                    p *= rate / j as f64;
                    acc += p;
                    if u < acc || p == 0.0 {
                        return j;
                    }
                    j += 1;
                }
            }
            Immigration::Dilog { scale } => {
                let u = 1.0 - rng.random::<f64>();
                if u > *scale {
                    0
                } else {
                    (scale / u).floor().min(u64::MAX as f64) as u64
                }
            }
        }
    }
}

/// Exact `Binomial(x, p)` draw.
fn binomial(rng: &mut ChaCha8Rng, x: u64, p: f64) -> u64 {
    if x == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return x;
    }
    let small = p.min(1.0 - p);
    let k = if x as f64 * small <= INVERSION_LIMIT {
        binomial_inversion(rng, x, small)
    } else {
        Binomial::new(x, small).expect("valid binomial").sample(rng)
    };
    if p > 0.5 {
        x - k
    } else {
        k
    }
}

fn binomial_inversion(rng: &mut ChaCha8Rng, x: u64, p: f64) -> u64 {
    let ratio = p / (1.0 - p);
    let mut f = (x as f64 * (-p).ln_1p()).exp();
    let mut u = rng.random::<f64>();
    let mut k = 0u64;
    while u >= f && k < x {
        u -= f;
        k += 1;
        f *= ratio * (x - k + 1) as f64 / k as f64;
        if f == 0.0 {
            break;
        }
    }
    k
}

/// A model prepared for repeated simulation up to a fixed horizon.
#[derive(Clone, Debug)]
pub struct PathSampler {
    rho: Vec<f64>,
    immigration: Vec<Immigration>,
}

impl PathSampler {
    pub fn new(model: &ModelSpec, n: usize) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::ZeroHorizon);
        }
        model.validate(n)?;
        let rho = (1..=n).map(|k| model.rho(k)).collect::<Result<Vec<_>, _>>()?;
        let immigration = (1..=n)
            .map(|k| Immigration::new(&model.immigration(k)?, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PathSampler { rho, immigration })
    }

    pub fn horizon(&self) -> usize {
        self.rho.len()
    }

    /// Draws `X_n` from `X_0 = 0`, thinning before immigration at each step.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let mut x = 0u64;
        for (rho, imm) in self.rho.iter().zip(&self.immigration) {
            x = binomial(rng, x, *rho).saturating_add(imm.sample(rng));
        }
        x
    }
}

/// One terminal value `X_n` drawn with `rng`.
pub fn sample_path(model: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<u64, SimError> {
    Ok(PathSampler::new(model, n)?.sample(rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaw {
    /// Normalized histogram. Values beyond the dense support cap are
    /// counted in `tail_mass`.
    pub pmf: Pmf,
    pub replicates: usize,
}

fn histogram(sampler: &PathSampler, seed: u64, range: std::ops::Range<usize>) -> BTreeMap<u64, u64> {
    let mut counts = BTreeMap::new();
    for i in range {
        let mut rng = replicate_stream(seed, i as u64);
        *counts.entry(sampler.sample(&mut rng)).or_insert(0) += 1;
    }
    counts
}

/// Histogram of `config.replicates` independent draws of `X_{config.horizon}`.
pub fn empirical_pmf(model: &ModelSpec, config: &SimConfig) -> Result<EmpiricalLaw, SimError> {
    config.validate()?;
    let sampler = PathSampler::new(model, config.horizon)?;
    let total = config.replicates;
    let workers = config
        .worker_hint
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get)
        .min(total);
    let chunk = total.div_ceil(workers);

    let mut counts = BTreeMap::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let range = (w * chunk).min(total)..((w + 1) * chunk).min(total);
                let sampler = &sampler;
                scope.spawn(move || histogram(sampler, config.seed, range))
            })
            .collect();
        for handle in handles {
            for (value, count) in handle.join().expect("worker panicked") {
                *counts.entry(value).or_insert(0u64) += count;
            }
        }
    });

    let len = counts
        .keys()
        .next_back()
        .map_or(1, |&max| (max as usize).saturating_add(1).min(MAX_SUPPORT));
    let mut probs = vec![0.0; len];
    let mut beyond = 0u64;
    for (value, count) in counts {
        match probs.get_mut(value as usize) {
            Some(slot) if (value as usize) < len => *slot = count as f64 / total as f64,
            _ => beyond += count,
        }
    }
    let pmf = Pmf::from_parts(probs, beyond as f64 / total as f64, 0.0).expect("histogram is a probability law");
    Ok(EmpiricalLaw { pmf, replicates: total })
}
