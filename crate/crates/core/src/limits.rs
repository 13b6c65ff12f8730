//! Asymptotics: Toeplitz weights, factorial-moment limit profiles, the
//! passage between `λ_j` and intensity measures, and numerical hypothesis
//! checkers.
//!
//! Every verdict produced here is an extrapolation from finitely many terms.
//! "consistent" means the sampled trajectory looks settled at its target, not
//! that the limit has been proven.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inar::{ModelError, ModelSpec, RhoSchedule, TriangularSpec};
use crate::laws::{ImmigrationLaw, IntensityMeasure, LawError};

/// Relative band for the "settled" test on the last three samples.
pub const SETTLE_BAND: f64 = 1e-3;
/// Bracket width below which an alternating series counts as converged.
pub const BRACKET_WIDTH: f64 = 1e-10;
/// Negative intensities down to this size are treated as rounding.
pub const NEGATIVE_SLACK: f64 = 1e-12;
/// Depth of factorial moments examined when no bounded support is visible.
pub const DEFAULT_DEPTH: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("weight index j = {j} exceeds n = {n}")]
    Index { j: usize, n: usize },
    #[error("order k must be at least 1")]
    ZeroOrder,
    #[error("bounded profile needs lambda_{0} = 0")]
    BoundedNotZero(usize),
    #[error("profile declares {declared} values but bounded support needs {needed}")]
    ProfileTooShort { declared: usize, needed: usize },
    #[error("lambda_{index} = {value} is negative or not finite")]
    Lambda { index: usize, value: f64 },
    #[error("mu{{{j}}} = {value:e} is negative: the profile is not the moment sequence of a measure")]
    NegativeIntensity { j: usize, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// `a^{(k)}_{n,j} = (1 − ρ_j) Π_{ℓ=j+1}^n ρ_ℓ^k`.
pub fn toeplitz_weight(rho: &RhoSchedule, n: usize, j: usize, k: usize) -> Result<f64, LimitError> {
    if j == 0 || j > n {
        return Err(LimitError::Index { j, n });
    }
    Ok(toeplitz_weights(rho, n, k)?[j - 1])
}

/// All weights `a^{(k)}_{n,j}`, `j = 1..=n`.
pub fn toeplitz_weights(rho: &RhoSchedule, n: usize, k: usize) -> Result<Vec<f64>, LimitError> {
    if k == 0 {
        return Err(LimitError::ZeroOrder);
    }
    let rhos = rho.values(n)?;
    let products = crate::inar::suffix_products(&rhos);
    Ok(rhos.iter().zip(products).map(|(r, p)| (1.0 - r) * p.powi(k as i32)).collect())
}

/// `Σ_{j≤n} a^{(k)}_{n,j} x_j`; `x[j − 1]` holds `x_j`.
pub fn toeplitz_transform(rho: &RhoSchedule, x: &[f64], k: usize, n: usize) -> Result<f64, LimitError> {
    if x.len() < n {
        return Err(LimitError::Index { j: x.len() + 1, n });
    }
    let weights = toeplitz_weights(rho, n, k)?;
    Ok(weights.iter().zip(x).map(|(a, x)| a * x).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SupportKind {
    /// `λ_J = 0`: the limit measure lives on `{1, …, J − 1}`.
    Bounded { j: usize },
    Unbounded,
}

/// Limits `λ_j` of `m_{n,j} / (j (1 − ρ_n))`; `lambdas[j − 1] = λ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorialLimitProfile {
    pub lambdas: Vec<f64>,
    pub support: SupportKind,
}

impl FactorialLimitProfile {
    pub fn bounded(lambdas: Vec<f64>, j: usize) -> Result<Self, LimitError> {
        let profile = FactorialLimitProfile { lambdas, support: SupportKind::Bounded { j } };
        profile.validate()?;
        Ok(profile)
    }

    pub fn unbounded(lambdas: Vec<f64>) -> Result<Self, LimitError> {
        let profile = FactorialLimitProfile { lambdas, support: SupportKind::Unbounded };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), LimitError> {
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !l.is_finite() || l < 0.0 {
                return Err(LimitError::Lambda { index: i + 1, value: l });
            }
        }
        if let SupportKind::Bounded { j } = self.support {
            if j == 0 {
                return Err(LimitError::BoundedNotZero(0));
            }
            if self.lambdas.len() + 1 < j {
                return Err(LimitError::ProfileTooShort { declared: self.lambdas.len(), needed: j - 1 });
            }
            if self.lambdas.get(j - 1).is_some_and(|&l| l != 0.0) {
                return Err(LimitError::BoundedNotZero(j));
            }
        }
        Ok(())
    }

    /// `λ_j`, zero for orders past a bounded support.
    pub fn lambda(&self, j: usize) -> f64 {
        match self.support {
            SupportKind::Bounded { j: cap } if j >= cap => 0.0,
            _ => self.lambdas.get(j.wrapping_sub(1)).copied().unwrap_or(0.0),
        }
    }
}

/// Enclosure of `μ{j}` by consecutive partial sums of the alternating series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Result of turning a `λ` profile into an intensity measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityEstimate {
    pub measure: IntensityMeasure,
    /// `brackets[j − 1]` encloses `μ{j}`.
    pub brackets: Vec<Bracket>,
    pub converged: bool,
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// `μ{j} = (1/j!) Σ_i (−1)^i / i! λ_{j+i}`.
///
/// For a bounded profile the sum is finite and exact. For an unbounded one
/// the available `λ`s give partial sums; the last odd and even partial sums
/// bracket `μ{j}` and the estimate is flagged unless the bracket is narrower
/// than `1e−10`. `j_max` bounds the number of atoms for unbounded profiles.
pub fn intensity_from_lambdas(profile: &FactorialLimitProfile, j_max: usize) -> Result<IntensityEstimate, LimitError> {
    profile.validate()?;
    let (atoms, depth) = match profile.support {
        SupportKind::Bounded { j } => (j.saturating_sub(1), j.saturating_sub(1)),
        SupportKind::Unbounded => (j_max.min(profile.lambdas.len()), profile.lambdas.len()),
    };
    let fact = factorials(depth + 1);
    let mut weights = Vec::with_capacity(atoms);
    let mut brackets = Vec::with_capacity(atoms);
    for j in 1..=atoms {
        let mut partial = 0.0;
        let mut last = [f64::NAN, f64::NAN];
        for i in 0..=depth - j {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            partial += sign * profile.lambda(j + i) / fact[i];
            last[i % 2] = partial / fact[j];
        }
        let value = partial / fact[j];
        let bracket = match profile.support {
            SupportKind::Bounded { .. } => Bracket { lower: value, upper: value, converged: true },
            SupportKind::Unbounded => {
                let (a, b) = (last[0], if last[1].is_nan() { f64::INFINITY } else { last[1] });
                let (lower, upper) = (a.min(b), a.max(b));
                Bracket { lower, upper, converged: upper - lower < BRACKET_WIDTH }
            }
        };
        if value < -NEGATIVE_SLACK && bracket.converged {
            return Err(LimitError::NegativeIntensity { j, value });
        }
        weights.push(value.max(0.0));
        brackets.push(bracket);
    }
    let converged = brackets.iter().all(|b| b.converged);
    Ok(IntensityEstimate {
        measure: IntensityMeasure::new(weights)?,
        brackets,
        converged,
    })
}

/// Factorial moments of an intensity measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorialMoments {
    pub profile: FactorialLimitProfile,
    /// Set when the measure is a truncation and the moments are lower bounds.
    pub lower_bound: bool,
    /// Orders whose partial sums keep growing across doublings of the cutoff.
    pub divergent: Vec<usize>,
}

/// `λ_j = Σ_{i≥j} i(i−1)⋯(i−j+1) μ{i}` for `j = 1..J−1`.
///
/// A measure carried in full on `{1, …, J − 1}` yields a bounded profile
/// with `λ_J = 0`. For truncations of infinite measures the values are lower
/// bounds, and an order whose partial sum gains at least 90% of the previous
/// doubling's increment is reported as divergent.
pub fn lambdas_from_intensity(mu: &IntensityMeasure, j: usize) -> Result<FactorialMoments, LimitError> {
    let orders = j.saturating_sub(1);
    let truncated = mu.tail_bound() > 0.0;
    let moment_up_to = |order: usize, cutoff: usize| -> f64 {
        (order..=cutoff.min(mu.support_len()))
            .map(|i| crate::pmf::falling_factorial(i, order) * mu.weight(i))
            .sum()
    };
    let lambdas: Vec<f64> = (1..=orders).map(|o| moment_up_to(o, mu.support_len())).collect();
    let mut divergent = Vec::new();
    if truncated && mu.support_len() >= 4 {
        let l = mu.support_len();
        for o in 1..=orders {
            let (s1, s2, s3) = (moment_up_to(o, l / 4), moment_up_to(o, l / 2), moment_up_to(o, l));
            let (prev, last) = (s2 - s1, s3 - s2);
            if prev > 0.0 && last >= 0.9 * prev {
                divergent.push(o);
            }
        }
    }
    let bounded = !truncated && mu.support_len() < j;
    let profile = if bounded {
        let mut lambdas = lambdas;
        lambdas.push(0.0);
        FactorialLimitProfile::bounded(lambdas, j)?
    } else {
        FactorialLimitProfile::unbounded(lambdas)?
    };
    Ok(FactorialMoments { profile, lower_bound: truncated, divergent })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "T3.1")]
    T31,
    #[serde(rename = "T4.1")]
    T41,
    #[serde(rename = "T4.3")]
    T43,
    #[serde(rename = "T5.1")]
    T51,
    #[serde(rename = "T5.2")]
    T52,
    #[serde(rename = "T5.4")]
    T54,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// A sampled sequence with the limit it is expected to approach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub name: String,
    pub values: Vec<f64>,
    /// Declared limit; `None` means "whatever the sequence settles at".
    pub target: Option<f64>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Trajectory {
    fn new(name: impl Into<String>, values: Vec<f64>, target: Option<f64>) -> Self {
        let verdict = settled(&values, target);
        Trajectory { name: name.into(), values, target, verdict, note: None }
    }

    fn with_note(mut self, note: impl Into<String>, verdict: Verdict) -> Self {
        self.note = Some(note.into());
        self.verdict = verdict;
        self
    }

    /// Value of the last sample.
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// The last three samples agree with each other and with the target within
/// a relative band of `1e−3`; near zero the band is absolute.
fn settled(values: &[f64], target: Option<f64>) -> Verdict {
    if values.len() < 3 || values.iter().any(|v| !v.is_finite()) {
        return Verdict::Inconclusive;
    }
    let tail = &values[values.len() - 3..];
    let centre = target.unwrap_or_else(|| tail.iter().sum::<f64>() / 3.0);
    let scale = centre.abs().max(1.0);
    let close = |a: f64, b: f64| (a - b).abs() <= SETTLE_BAND * scale * (1.0 + 1e-9);
    let agree = tail.iter().all(|&v| close(v, centre)) && close(tail[0], tail[2]);
    if agree {
        return Verdict::Consistent;
    }
    // Still moving towards the target is not a refutation.
    let first_gap = (tail[0] - centre).abs();
    let last_gap = (tail[2] - centre).abs();
    if last_gap < first_gap {
        Verdict::Inconclusive
    } else {
        Verdict::Inconsistent
    }
}

/// Heuristic diagnosis of `Σ (1 − ρ_n) = ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceDiagnostic {
    /// Horizons `N`, doubling from 1.
    pub horizons: Vec<usize>,
    /// `Σ_{n≤N} (1 − ρ_n)`.
    pub partial_sums: Vec<f64>,
    /// Fitted `γ` in `S(2N) − S(N) ∝ N^γ`; `γ ≥ 0` means logarithmic or faster growth.
    pub growth_exponent: Option<f64>,
    pub verdict: Verdict,
}

fn diagnose_divergence(rho: &RhoSchedule, n_max: usize) -> Result<DivergenceDiagnostic, LimitError> {
    let mut horizons = Vec::new();
    let mut partial_sums = Vec::new();
    let mut sum = 0.0;
    let mut next = 1usize;
    for n in 1..=n_max {
        sum += 1.0 - rho.rho(n)?;
        if n == next {
            horizons.push(n);
            partial_sums.push(sum);
            next *= 2;
        }
    }
    // Least-squares slope of log increment against log N over the last few doublings.
    let points: Vec<(f64, f64)> = horizons
        .windows(2)
        .zip(partial_sums.windows(2))
        .filter(|(h, _)| h[0] >= 8)
        .map(|(h, s)| ((h[0] as f64).ln(), (s[1] - s[0]).max(f64::MIN_POSITIVE).ln()))
        .collect();
    let growth_exponent = (points.len() >= 3).then(|| {
        let len = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / len;
        let my = points.iter().map(|p| p.1).sum::<f64>() / len;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let verdict = match growth_exponent {
        Some(g) if g >= -0.05 => Verdict::Consistent,
        Some(g) if g <= -0.5 => Verdict::Inconsistent,
        _ => Verdict::Inconclusive,
    };
    Ok(DivergenceDiagnostic { horizons, partial_sums, growth_exponent, verdict })
}

/// Lower bounds of `E ε_n` at growing truncation cutoffs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentGrowth {
    pub n: usize,
    pub cutoffs: Vec<usize>,
    pub lower_bounds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub hypothesis: String,
    pub verdict: Verdict,
}

/// Numerical rendering of a theorem's hypotheses at sampled horizons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: Theorem,
    pub n_samples: Vec<usize>,
    pub trajectories: Vec<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceDiagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moment_growth: Vec<MomentGrowth>,
    pub hypotheses: Vec<HypothesisVerdict>,
    pub caveat: String,
}

const CAVEAT: &str = "limits are extrapolated from finitely many samples; verdicts are heuristic, not proofs";

impl ConditionReport {
    pub fn verdict(&self, hypothesis: &str) -> Option<Verdict> {
        self.hypotheses.iter().find(|h| h.hypothesis == hypothesis).map(|h| h.verdict)
    }

    pub fn trajectory(&self, name: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.name == name)
    }

    /// `Consistent` only when every hypothesis is.
    pub fn overall(&self) -> Verdict {
        combine(self.hypotheses.iter().map(|h| h.verdict))
    }
}

fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Consistent;
    for v in verdicts {
        match v {
            Verdict::Inconsistent => return Verdict::Inconsistent,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Consistent => {}
        }
    }
    out
}

fn moment_or_bound(law: &ImmigrationLaw, j: usize) -> Result<(f64, bool), LimitError> {
    let m = law.factorial_moment(j)?;
    if m.value.is_finite() {
        Ok((m.value, false))
    } else {
        Ok((law.truncated_factorial_moment(j, 1_000_000)?, true))
    }
}

/// Largest atom of the immigration law, `None` when unbounded.
fn support_max(law: &ImmigrationLaw) -> Option<usize> {
    match law {
        ImmigrationLaw::Finite { pmf } if pmf.is_tail_free() => Some(pmf.len() - 1),
        ImmigrationLaw::Poisson { rate } if *rate == 0.0 => Some(0),
        ImmigrationLaw::Dilog { scale } if *scale == 0.0 => Some(0),
        _ => None,
    }
}

/// Samples the hypotheses of `theorem` for an INAR model at `n_samples`.
pub fn check_hypotheses(model: &ModelSpec, theorem: Theorem, n_samples: &[usize]) -> Result<ConditionReport, LimitError> {
    let mut samples: Vec<usize> = n_samples.iter().copied().filter(|&n| n >= 1).collect();
    samples.sort_unstable();
    samples.dedup();
    let n_max = samples.last().copied().unwrap_or(1);

    let mut trajectories = Vec::new();
    let mut hypotheses = Vec::new();
    let mut moment_growth = Vec::new();

    // (i): ρ_n < 1, ρ_n → 1, Σ (1 − ρ_n) = ∞.
    let mut max_rho = 0.0f64;
    for n in 1..=n_max {
        max_rho = max_rho.max(model.rho(n)?);
    }
    let gap = Trajectory::new(
        "1-rho",
        samples.iter().map(|&n| model.rho(n).map(|r| 1.0 - r)).collect::<Result<_, _>>()?,
        Some(0.0),
    );
    let divergence = diagnose_divergence(&model.rho, n_max)?;
    hypotheses.push(HypothesisVerdict {
        hypothesis: "(i) rho_n < 1".into(),
        verdict: if max_rho < 1.0 { Verdict::Consistent } else { Verdict::Inconsistent },
    });
    hypotheses.push(HypothesisVerdict { hypothesis: "(i) rho_n -> 1".into(), verdict: gap.verdict });
    hypotheses.push(HypothesisVerdict {
        hypothesis: "(i) sum (1 - rho_n) = infinity".into(),
        verdict: divergence.verdict,
    });
    trajectories.push(gap);

    let laws = samples.iter().map(|&n| model.immigration(n)).collect::<Result<Vec<_>, _>>()?;
    let gaps: Vec<f64> = samples.iter().map(|&n| model.rho(n).map(|r| 1.0 - r)).collect::<Result<_, _>>()?;

    // Ratio m_{n,j} / (scale_j (1 − ρ_n)) along the samples; infinite moments
    // are replaced by truncation lower bounds and flagged.
    let ratio = |j: usize, scale: f64| -> Result<(Vec<f64>, bool), LimitError> {
        let mut infinite = false;
        let mut values = Vec::with_capacity(samples.len());
        for (law, g) in laws.iter().zip(&gaps) {
            let (m, bound) = moment_or_bound(law, j)?;
            infinite |= bound;
            values.push(m / (scale * g));
        }
        Ok((values, infinite))
    };

    if laws.iter().any(ImmigrationLaw::is_heavy_tailed) {
        let cutoffs: Vec<usize> = (2..=6).map(|e| 10usize.pow(e)).collect();
        for (&n, law) in samples.iter().zip(&laws).rev().take(1) {
            let lower_bounds = cutoffs
                .iter()
                .map(|&c| law.truncated_factorial_moment(1, c))
                .collect::<Result<Vec<_>, _>>()?;
            moment_growth.push(MomentGrowth { n, cutoffs: cutoffs.clone(), lower_bounds });
        }
    }

    match theorem {
        Theorem::T31 | Theorem::T41 => {
            if theorem == Theorem::T31 {
                let binary = laws.iter().all(|l| support_max(l).is_some_and(|s| s <= 1));
                hypotheses.push(HypothesisVerdict {
                    hypothesis: "P(eps_n in {0,1}) = 1".into(),
                    verdict: if binary { Verdict::Consistent } else { Verdict::Inconsistent },
                });
            }
            let (values, infinite) = ratio(1, 1.0)?;
            let mut t = Trajectory::new("m1/(1-rho)", values, None);
            if infinite {
                t = t.with_note("E eps_n = infinity; values are truncation lower bounds", Verdict::Inconsistent);
            }
            hypotheses.push(HypothesisVerdict { hypothesis: "(ii) m_{n,1}/(1-rho_n) -> lambda".into(), verdict: t.verdict });
            trajectories.push(t);
            if theorem == Theorem::T41 {
                let (values, infinite) = ratio(2, 1.0)?;
                let mut t = Trajectory::new("m2/(1-rho)", values, Some(0.0));
                if infinite {
                    t = t.with_note("second factorial moment is infinite", Verdict::Inconsistent);
                }
                hypotheses.push(HypothesisVerdict { hypothesis: "(ii) m_{n,2}/(1-rho_n) -> 0".into(), verdict: t.verdict });
                trajectories.push(t);
            }
        }
        Theorem::T51 | Theorem::T52 => {
            let visible = laws.iter().map(support_max).collect::<Option<Vec<_>>>();
            let depth = match (theorem, &visible) {
                (Theorem::T51, Some(s)) => s.iter().copied().max().unwrap_or(0) + 1,
                _ => DEFAULT_DEPTH,
            };
            let mut verdicts = Vec::new();
            let mut vanishing = false;
            for j in 1..=depth.max(1) {
                let (values, infinite) = ratio(j, j as f64)?;
                let mut t = Trajectory::new(format!("m{j}/({j}(1-rho))"), values, None);
                if infinite {
                    t = t.with_note(
                        "E eps_n = infinity; values are truncation lower bounds",
                        Verdict::Inconsistent,
                    );
                }
                if t.verdict == Verdict::Consistent && t.last().is_some_and(|v| v.abs() <= SETTLE_BAND) {
                    vanishing = true;
                }
                verdicts.push(t.verdict);
                trajectories.push(t);
            }
            hypotheses.push(HypothesisVerdict {
                hypothesis: "(ii) m_{n,j}/(j(1-rho_n)) -> lambda_j".into(),
                verdict: combine(verdicts),
            });
            if theorem == Theorem::T51 {
                hypotheses.push(HypothesisVerdict {
                    hypothesis: "(ii) lambda_J = 0 for some J".into(),
                    verdict: if vanishing { Verdict::Consistent } else { Verdict::Inconclusive },
                });
            }
        }
        Theorem::T43 | Theorem::T54 => {
            hypotheses.push(HypothesisVerdict {
                hypothesis: "triangular-array theorem applied to an INAR model".into(),
                verdict: Verdict::Inconclusive,
            });
        }
    }

    Ok(ConditionReport {
        theorem,
        n_samples: samples,
        trajectories,
        divergence: Some(divergence),
        max_rho: Some(max_rho),
        moment_growth,
        hypotheses,
        caveat: CAVEAT.into(),
    })
}

/// Samples the row sums of a triangular-array theorem.
pub fn check_triangular(spec: &TriangularSpec, theorem: Theorem, n_samples: &[usize]) -> Result<ConditionReport, LimitError> {
    let mut samples: Vec<usize> = n_samples.iter().copied().filter(|&n| n >= 1).collect();
    samples.sort_unstable();
    samples.dedup();

    // Row sums Σ_k p^j m_{n,k,j} for j ≤ depth and Σ_k (p E ζ)².
    let depth = if theorem == Theorem::T54 { 4 } else { 2 };
    let mut sums = vec![Vec::with_capacity(samples.len()); depth + 1];
    for &n in &samples {
        let row = spec.row(n)?;
        let mut acc = vec![0.0; depth + 1];
        for entry in &row {
            for (j, slot) in acc.iter_mut().enumerate().take(depth + 1).skip(1) {
                *slot += entry.p.powi(j as i32) * entry.law.factorial_moment(j).map(|m| m.value).unwrap_or(0.0);
            }
            let first = entry.p * entry.law.mean().value;
            acc[0] += first * first;
        }
        for (s, a) in sums.iter_mut().zip(acc) {
            s.push(a);
        }
    }

    let mut trajectories = Vec::new();
    let mut hypotheses = Vec::new();
    match theorem {
        Theorem::T43 => {
            let named = [
                ("(i) sum p E zeta -> lambda", "sum p*m1", sums[1].clone(), None),
                ("(ii) sum (p E zeta)^2 -> 0", "sum (p*m1)^2", sums[0].clone(), Some(0.0)),
                ("(iii) sum p^2 E zeta(zeta-1) -> 0", "sum p^2*m2", sums[2].clone(), Some(0.0)),
            ];
            for (hypothesis, name, values, target) in named {
                let t = Trajectory::new(name, values, target);
                hypotheses.push(HypothesisVerdict { hypothesis: hypothesis.into(), verdict: t.verdict });
                trajectories.push(t);
            }
        }
        Theorem::T54 => {
            let mut verdicts = Vec::new();
            for (j, values) in sums.iter().enumerate().skip(1) {
                let t = Trajectory::new(format!("sum p^{j}*m{j}"), values.clone(), None);
                verdicts.push(t.verdict);
                trajectories.push(t);
            }
            hypotheses.push(HypothesisVerdict {
                hypothesis: "(i) sum p^j m_{n,k,j} -> lambda_j".into(),
                verdict: combine(verdicts),
            });
            let t = Trajectory::new("sum (p*m1)^2", sums[0].clone(), Some(0.0));
            hypotheses.push(HypothesisVerdict { hypothesis: "(ii) sum (p E zeta)^2 -> 0".into(), verdict: t.verdict });
            trajectories.push(t);
        }
        _ => {
            hypotheses.push(HypothesisVerdict {
                hypothesis: "INAR theorem applied to a triangular array".into(),
                verdict: Verdict::Inconclusive,
            });
        }
    }

    Ok(ConditionReport {
        theorem,
        n_samples: samples,
        trajectories,
        divergence: None,
        max_rho: None,
        moment_growth: Vec::new(),
        hypotheses,
        caveat: CAVEAT.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inar::{Decay, ImmigrationSchedule, TriangularEntry};
    use crate::pmf::Pmf;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn harmonic() -> RhoSchedule {
        RhoSchedule::NearCritical { decay: Decay::harmonic(1.0) }
    }

    #[test]
    fn toeplitz_examples() {
        let rho = harmonic();
        assert!((toeplitz_weight(&rho, 5, 2, 1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(toeplitz_weight(&rho, 5, 5, 1).unwrap(), 1.0 - rho.rho(5).unwrap());
        assert!(toeplitz_weight(&rho, 5, 6, 1).is_err());
        for n in [1usize, 7, 100] {
            let ones = vec![1.0; n];
            assert!((toeplitz_transform(&rho, &ones, 1, n).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(toeplitz_transform(&rho, &vec![0.0; n], 1, n).unwrap(), 0.0);
        }
        let n = 10_000;
        let half = toeplitz_transform(&rho, &vec![1.0; n], 2, n).unwrap();
        assert!((half - 0.5).abs() < 0.01);
    }

    #[test]
    fn bounded_intensity_examples() {
        let p = FactorialLimitProfile::bounded(vec![0.7, 0.0], 2).unwrap();
        let mu = intensity_from_lambdas(&p, 10).unwrap();
        assert_eq!(mu.measure.weights(), &[0.7]);
        let p = FactorialLimitProfile::bounded(vec![2.0, 1.0, 0.0], 3).unwrap();
        let mu = intensity_from_lambdas(&p, 10).unwrap();
        assert!((mu.measure.weight(1) - 1.0).abs() < 1e-15);
        assert!((mu.measure.weight(2) - 0.5).abs() < 1e-15);
        assert!(mu.converged);
        assert!(FactorialLimitProfile::bounded(vec![2.0, 1.0, 0.5], 3).is_err());
        let bad = FactorialLimitProfile::bounded(vec![1.0, 3.0, 0.0], 3).unwrap();
        assert!(matches!(intensity_from_lambdas(&bad, 10), Err(LimitError::NegativeIntensity { .. })));
    }

    #[test]
    fn lambdas_examples() {
        let mu = IntensityMeasure::new(vec![1.0]).unwrap();
        let l = lambdas_from_intensity(&mu, 3).unwrap();
        assert_eq!(l.profile.lambda(1), 1.0);
        assert_eq!(l.profile.lambda(2), 0.0);
        let mu = IntensityMeasure::new(vec![1.0, 0.5]).unwrap();
        let l = lambdas_from_intensity(&mu, 3).unwrap();
        assert_eq!(l.profile.lambdas, vec![2.0, 1.0, 0.0]);
        assert_eq!(l.profile.support, SupportKind::Bounded { j: 3 });

        let j_max = 1 << 16;
        let weights: Vec<f64> = (1..=j_max).map(|j| 1.0 / (j as f64).powi(2)).collect();
        let mu = IntensityMeasure::with_tail(weights, None, 1.0 / j_max as f64).unwrap();
        let l = lambdas_from_intensity(&mu, 2).unwrap();
        assert!(l.lower_bound);
        assert_eq!(l.divergent, vec![1]);
        let weights: Vec<f64> = (1..=j_max).map(|j| 1.0 / (j as f64).powi(3)).collect();
        let mu = IntensityMeasure::with_tail(weights, None, 1.0 / j_max as f64).unwrap();
        assert!(lambdas_from_intensity(&mu, 2).unwrap().divergent.is_empty());
    }

    #[test]
    fn unbounded_brackets() {
        // λ_j = x^j gives μ{j} = x^j e^{−x} / j!, the Poisson-type intensity.
        let x: f64 = 0.8;
        let lambdas: Vec<f64> = (1..=40).map(|j| x.powi(j)).collect();
        let p = FactorialLimitProfile::unbounded(lambdas).unwrap();
        let est = intensity_from_lambdas(&p, 5).unwrap();
        assert!(est.converged);
        for j in 1..=5 {
            let expected = x.powi(j as i32) * (-x).exp() / factorials(j)[j];
            let b = est.brackets[j - 1];
            assert!(b.lower <= expected + 1e-15 && expected <= b.upper + 1e-15);
        }
        let short = FactorialLimitProfile::unbounded(vec![1.0, 1.0, 1.0]).unwrap();
        let est = intensity_from_lambdas(&short, 2).unwrap();
        assert!(!est.converged);
    }

    #[test]
    fn hypotheses_bernoulli_preset() {
        let model = ModelSpec::new(
            "b",
            harmonic(),
            ImmigrationSchedule::Bernoulli { decay: Decay::harmonic(1.0) },
        );
        let report = check_hypotheses(&model, Theorem::T31, &[1000, 10_000, 100_000]).unwrap();
        let t = report.trajectory("m1/(1-rho)").unwrap();
        assert!((t.last().unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(report.overall(), Verdict::Consistent);
        let sums = &report.divergence.as_ref().unwrap().partial_sums;
        // Σ_{n≤N} 1/n at N = 2^16.
        assert!((sums.last().unwrap() - 11.6667).abs() < 1e-3);
    }

    #[test]
    fn hypotheses_reject_summable_gaps() {
        let model = ModelSpec::new(
            "summable",
            RhoSchedule::NearCritical { decay: Decay { scale: 1.0, shift: 0.0, exponent: 2.0 } },
            ImmigrationSchedule::Bernoulli { decay: Decay { scale: 1.0, shift: 0.0, exponent: 2.0 } },
        );
        let report = check_hypotheses(&model, Theorem::T31, &[100, 1000, 10_000]).unwrap();
        let d = report.divergence.as_ref().unwrap();
        assert_eq!(d.verdict, Verdict::Inconsistent);
        assert!(*d.partial_sums.last().unwrap() < std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn hypotheses_flag_infinite_mean() {
        let model = ModelSpec::new("dilog", harmonic(), ImmigrationSchedule::Dilog { decay: Decay::harmonic(1.0) });
        let report = check_hypotheses(&model, Theorem::T52, &[50, 100, 500]).unwrap();
        assert_eq!(report.verdict("(ii) m_{n,j}/(j(1-rho_n)) -> lambda_j"), Some(Verdict::Inconsistent));
        let growth = &report.moment_growth[0];
        assert!(growth.lower_bounds.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn triangular_examples() {
        let unit = TriangularSpec::Uniform { law: Pmf::dirac(1), lambda: 1.0, per_n: 1 };
        let report = check_triangular(&unit, Theorem::T43, &[1000, 10_000, 100_000]).unwrap();
        assert!(report.trajectory("sum p*m1").unwrap().values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let second = &report.trajectory("sum (p*m1)^2").unwrap().values;
        assert!((second[2] - 1e-5).abs() < 1e-15);
        assert!(report.trajectory("sum p^2*m2").unwrap().values.iter().all(|&v| v == 0.0));
        assert_eq!(report.overall(), Verdict::Consistent);

        let empty = TriangularSpec::Explicit { rows: vec![vec![]; 3] };
        let report = check_triangular(&empty, Theorem::T43, &[1, 2, 3]).unwrap();
        assert!(report.trajectory("sum p*m1").unwrap().values.iter().all(|&v| v == 0.0));
        assert_eq!(report.overall(), Verdict::Consistent);

        let two = TriangularSpec::Uniform { law: Pmf::dirac(2), lambda: 1.0, per_n: 1 };
        let report = check_triangular(&two, Theorem::T54, &[100, 1000, 10_000]).unwrap();
        assert!((report.trajectory("sum p^1*m1").unwrap().last().unwrap() - 2.0).abs() < 1e-12);
        assert!((report.trajectory("sum p^2*m2").unwrap().last().unwrap() - 2e-4).abs() < 1e-15);
        let _ = TriangularEntry { law: Pmf::dirac(0), p: 0.0 };
    }

    fn random_measure() -> impl Strategy<Value = IntensityMeasure> {
        prop::collection::vec(0.0f64..1.0, 1..=8).prop_map(|w| IntensityMeasure::new(w).unwrap())
    }

    proptest! {
        #[test]
        fn toeplitz_weights_decrease_in_k(gaps in prop::collection::vec(0.001f64..1.0, 2..40)) {
            let n = gaps.len();
            let rho = RhoSchedule::Explicit { values: gaps.iter().map(|g| 1.0 - g).collect() };
            let a1 = toeplitz_weights(&rho, n, 1).unwrap();
            let a2 = toeplitz_weights(&rho, n, 2).unwrap();
            for (x, y) in a1.iter().zip(&a2) {
                prop_assert!(y <= x);
            }
        }

        #[test]
        fn lambda_mu_round_trip(mu in random_measure()) {
            let j = mu.support_len() + 1;
            let lambdas = lambdas_from_intensity(&mu, j).unwrap();
            let back = intensity_from_lambdas(&lambdas.profile, j).unwrap();
            for i in 1..j {
                prop_assert!((back.measure.weight(i) - mu.weight(i)).abs() < 1e-10);
            }
        }

        #[test]
        fn polynomial_identity(mu in random_measure(), r in 0.0f64..=1.0, theta in 0.0f64..6.3) {
            let z = Complex64::from_polar(r, theta);
            let j = mu.support_len() + 1;
            let profile = lambdas_from_intensity(&mu, j).unwrap().profile;
            let fact = factorials(j);
            let rhs: Complex64 = (1..j).map(|i| profile.lambda(i) / fact[i] * (z - 1.0).powu(i as u32)).sum();
            prop_assert!((mu.log_gf(z) - rhs).norm() < 1e-10);
        }
    }
}
