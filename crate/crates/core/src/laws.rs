//! Named distributions: Bernoulli, Poisson, Dirac, binomial mixtures and
//! compound Poisson laws, plus the immigration laws used by the model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::fft;
use crate::pmf::{Moment, Pmf, PmfError};

/// Measures with at most this many atoms are turned into a compound Poisson
/// law by convolving scaled Poisson laws; larger ones go through the FFT.
const CP_CONVOLUTION_MAX_SUPPORT: usize = 256;
/// Upper limit on the number of stored entries a law may occupy.
pub const MAX_SUPPORT: usize = 1 << 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("probability {0} lies outside [0, 1]")]
    Probability(f64),
    #[error("rate {0} must be finite and non-negative")]
    Rate(f64),
    #[error("intensity weight at {index} is invalid ({value})")]
    Weight { index: usize, value: f64 },
    #[error("declared total {declared} is inconsistent with stored mass {stored} and tail bound {tail_bound}")]
    DeclaredTotal { declared: f64, stored: f64, tail_bound: f64 },
    #[error("unrepresented mass {tail:e} exceeds ten times the tolerance {tolerance:e}")]
    TailTooLarge { tail: f64, tolerance: f64 },
    #[error("required support {0} exceeds the supported maximum")]
    SupportTooLarge(usize),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

pub fn dirac(k: usize) -> Pmf {
    Pmf::dirac(k)
}

pub fn bernoulli(p: f64) -> Result<Pmf, LawError> {
    check_probability(p)?;
    Ok(Pmf::canonicalize(vec![1.0 - p, p], 0.0)?)
}

fn check_probability(p: f64) -> Result<(), LawError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(LawError::Probability(p))
    }
}

/// Poisson law truncated at the smallest point whose upper tail is below
/// `tolerance`. `Po(0)` is the point mass at zero.
pub fn poisson(lambda: f64, tolerance: f64) -> Result<Pmf, LawError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(LawError::Rate(lambda));
    }
    if lambda == 0.0 {
        return Ok(Pmf::dirac(0));
    }
    let mode = lambda.floor() as usize;
    if mode >= MAX_SUPPORT {
        return Err(LawError::SupportTooLarge(mode.saturating_add(1)));
    }
    let log_at = |k: usize| -lambda + k as f64 * lambda.ln() - ln_gamma(k as f64 + 1.0);
    let mut terms = vec![0.0; mode + 1];
    terms[mode] = log_at(mode).exp();
    for k in (0..mode).rev() {
        terms[k] = terms[k + 1] * (k + 1) as f64 / lambda;
    }
    // Walk far enough to the right that the remaining terms are negligible
    // next to any tolerance, then read tails off the suffix sums.
    let mut k = mode;
    loop {
        let next = terms[k] * lambda / (k + 1) as f64;
        k += 1;
        terms.push(next);
        if (next < 1e-40 && k as f64 > lambda) || next == 0.0 {
            break;
        }
        if terms.len() > MAX_SUPPORT {
            return Err(LawError::SupportTooLarge(terms.len()));
        }
    }
    let mut suffix = 0.0;
    let mut cut = terms.len();
    for j in (0..terms.len()).rev() {
        if suffix + terms[j] >= tolerance {
            break;
        }
        suffix += terms[j];
        cut = j;
    }
    let cut = cut.max(1);
    let stored: Vec<f64> = terms[..cut].to_vec();
    let tail = terms[cut..].iter().rev().sum::<f64>();
    let total = stored.iter().sum::<f64>() + tail;
    let stored = stored.into_iter().map(|p| p / total).collect();
    Ok(Pmf::from_parts(stored, tail / total, 0.0)?)
}

/// Binomial mixture `Bi(μ, p)`: the law of a `p`-thinned `μ` variable.
pub fn binomial_mixture(mu: &Pmf, p: f64) -> Result<Pmf, LawError> {
    check_probability(p)?;
    let tail = mu.tail_mass();
    if p == 1.0 {
        return Ok(mu.clone());
    }
    if p == 0.0 {
        return Ok(Pmf::from_parts(vec![1.0 - tail], tail, 0.0)?);
    }
    let src = mu.probs();
    let mut out = vec![0.0; src.len()];
    let mut row = Vec::with_capacity(src.len());
    for (l, &w) in src.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        binomial_row(l, p, &mut row);
        for (o, r) in out.iter_mut().zip(&row) {
            *o += w * r;
        }
    }
    let stored: f64 = out.iter().sum();
    if stored > 0.0 {
        let scale = (1.0 - tail) / stored;
        for o in &mut out {
            *o *= scale;
        }
    }
    Ok(Pmf::from_parts(out, tail, 0.0)?)
}

/// Fills `row` with the Binomial(`l`, `p`) masses, starting at the mode and
/// recursing outwards so no entry underflows needlessly.
fn binomial_row(l: usize, p: f64, row: &mut Vec<f64>) {
    row.clear();
    row.resize(l + 1, 0.0);
    let q = 1.0 - p;
    let mode = (((l + 1) as f64) * p).floor().min(l as f64) as usize;
    let lf = l as f64;
    let log_mode = ln_gamma(lf + 1.0) - ln_gamma(mode as f64 + 1.0) - ln_gamma((l - mode) as f64 + 1.0)
        + mode as f64 * p.ln()
        + (l - mode) as f64 * q.ln();
    row[mode] = log_mode.exp();
    let odds = p / q;
    for j in mode..l {
        row[j + 1] = row[j] * (l - j) as f64 / (j + 1) as f64 * odds;
    }
    for j in (0..mode).rev() {
        row[j] = row[j + 1] * (j + 1) as f64 / (l - j) as f64 / odds;
    }
    let total: f64 = row.iter().sum();
    for r in row.iter_mut() {
        *r /= total;
    }
}

/// Finite measure `μ` on the positive integers.
///
/// `weights[i]` is `μ{i + 1}`. When the measure is a truncation of an
/// infinite one, `tail_bound` bounds the omitted mass and `declared_total`
/// may carry the analytically known `‖μ‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntensity")]
pub struct IntensityMeasure {
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    declared_total: Option<f64>,
    #[serde(default)]
    tail_bound: f64,
}

#[derive(Deserialize)]
struct RawIntensity {
    weights: Vec<f64>,
    #[serde(default)]
    declared_total: Option<f64>,
    #[serde(default)]
    tail_bound: f64,
}

impl TryFrom<RawIntensity> for IntensityMeasure {
    type Error = LawError;

    fn try_from(raw: RawIntensity) -> Result<Self, LawError> {
        IntensityMeasure::with_tail(raw.weights, raw.declared_total, raw.tail_bound)
    }
}

impl IntensityMeasure {
    /// A measure with `weights[i] = μ{i + 1}` and nothing omitted.
    pub fn new(weights: Vec<f64>) -> Result<Self, LawError> {
        Self::with_tail(weights, None, 0.0)
    }

    pub fn with_tail(
        mut weights: Vec<f64>,
        declared_total: Option<f64>,
        tail_bound: f64,
    ) -> Result<Self, LawError> {
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(LawError::Weight { index: i + 1, value: w });
            }
        }
        if !tail_bound.is_finite() || tail_bound < 0.0 {
            return Err(LawError::Rate(tail_bound));
        }
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        let stored: f64 = weights.iter().sum();
        if let Some(declared) = declared_total {
            let residual = declared - stored;
            let slack = 1e-12 * declared.abs().max(1.0);
            if !declared.is_finite() || residual < -slack || residual > tail_bound + slack {
                return Err(LawError::DeclaredTotal { declared, stored, tail_bound });
            }
        }
        Ok(IntensityMeasure { weights, declared_total, tail_bound })
    }

    /// `μ{j}`, zero outside the stored support.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.weights.get(j - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest atom carried explicitly.
    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn stored_total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn declared_total(&self) -> Option<f64> {
        self.declared_total
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Best available bound on the omitted mass.
    pub fn residual(&self) -> f64 {
        match self.declared_total {
            Some(d) => (d - self.stored_total()).clamp(0.0, self.tail_bound),
            None => self.tail_bound,
        }
    }

    /// `μ` restricted to the positive integers of a pmf, as used for `CP(Bi(ε, p))`.
    pub fn from_positive_part(pmf: &Pmf) -> Self {
        let weights = pmf.probs().iter().skip(1).copied().collect();
        IntensityMeasure::with_tail(weights, None, pmf.tail_mass())
            .expect("pmf entries are valid weights")
    }

    /// Superposition `μ + ν`.
    pub fn add(&self, other: &IntensityMeasure) -> IntensityMeasure {
        let len = self.weights.len().max(other.weights.len());
        let weights = (1..=len).map(|j| self.weight(j) + other.weight(j)).collect();
        let declared_total = match (self.declared_total, other.declared_total) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        IntensityMeasure {
            weights,
            declared_total,
            tail_bound: self.tail_bound + other.tail_bound,
        }
    }

    /// `Σ_j μ{j} (z^j − 1)`, the exponent of the compound Poisson generating function.
    pub fn log_gf(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut zj = Complex64::new(1.0, 0.0);
        for &w in &self.weights {
            zj *= z;
            acc += w * (zj - 1.0);
        }
        acc
    }

    /// Chernoff bound on `P(S ≥ level)` for `S ~ CP(μ)` using the stored weights.
    pub fn chernoff_upper_tail(&self, level: usize) -> f64 {
        if self.weights.is_empty() {
            return if level == 0 { 1.0 } else { 0.0 };
        }
        let len = self.weights.len() as f64;
        let exponent = |theta: f64| {
            let cumulant: f64 = self
                .weights
                .iter()
                .enumerate()
                .map(|(i, &w)| w * (theta * (i + 1) as f64).exp_m1())
                .sum();
            cumulant - theta * level as f64
        };
        // The exponent is convex in θ; golden-section search on a bracket
        // that keeps the cumulant finite.
        let (mut lo, mut hi) = (0.0f64, 600.0 / len);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - ratio * (hi - lo);
        let mut b = lo + ratio * (hi - lo);
        let (mut fa, mut fb) = (exponent(a), exponent(b));
        for _ in 0..80 {
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - ratio * (hi - lo);
                fa = exponent(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + ratio * (hi - lo);
                fb = exponent(b);
            }
        }
        fa.min(fb).min(0.0).exp()
    }
}

/// Compound Poisson law `CP(μ)` with generating function `exp Σ μ{j}(z^j − 1)`.
///
/// Small measures are handled as the convolution of the laws of `j·η_j`
/// with `η_j ~ Po(μ{j})`. Large measures are exponentiated in the Fourier
/// domain; aliasing is bounded by a Chernoff estimate and added to the tail.
/// Omitted intensity mass `r` scales every stored entry by `e^{-r}`, which
/// keeps the stored values lower bounds.
pub fn compound_poisson(mu: &IntensityMeasure, tolerance: f64) -> Result<Pmf, LawError> {
    let residual = mu.residual();
    let base = if mu.support_len() <= CP_CONVOLUTION_MAX_SUPPORT {
        cp_by_convolution(mu, tolerance)?
    } else {
        cp_by_fft(mu, tolerance)?
    };
    let pmf = if residual > 0.0 {
        let scale = (-residual).exp();
        let (probs, tail) = base.into_parts();
        let probs: Vec<f64> = probs.into_iter().map(|p| p * scale).collect();
        let tail = 1.0 - scale * (1.0 - tail);
        Pmf::from_parts(probs, tail, 0.0)?
    } else {
        base
    };
    if pmf.tail_mass() > 10.0 * tolerance {
        return Err(LawError::TailTooLarge { tail: pmf.tail_mass(), tolerance });
    }
    Ok(pmf)
}

fn cp_by_convolution(mu: &IntensityMeasure, tolerance: f64) -> Result<Pmf, LawError> {
    let atoms = mu.weights.iter().filter(|&&w| w > 0.0).count().max(1);
    let share = tolerance / (2.0 * atoms as f64);
    let mut acc = Pmf::dirac(0);
    for (i, &w) in mu.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let j = i + 1;
        let po = poisson(w, share)?;
        let (probs, tail) = po.into_parts();
        let mut spread = vec![0.0; (probs.len() - 1) * j + 1];
        for (k, p) in probs.into_iter().enumerate() {
            spread[k * j] = p;
        }
        acc = acc.convolve(&Pmf::from_parts(spread, tail, 0.0)?);
    }
    Ok(acc)
}

fn cp_by_fft(mu: &IntensityMeasure, tolerance: f64) -> Result<Pmf, LawError> {
    // Entries below the first omitted atom are exact; beyond that only the
    // fully specified measures can be followed further out.
    let mut window = mu.support_len() + 1;
    if mu.residual() == 0.0 {
        while mu.chernoff_upper_tail(window) > 0.5 * tolerance {
            window *= 2;
            if window > MAX_SUPPORT {
                return Err(LawError::SupportTooLarge(window));
            }
        }
    }
    let mut size = fft::smooth_size(2 * window);
    let aliasing_target = (1e-3 * tolerance).min(1e-13);
    while mu.chernoff_upper_tail(size) > aliasing_target {
        size = fft::smooth_size(2 * size);
        if size > 4 * MAX_SUPPORT {
            return Err(LawError::SupportTooLarge(size));
        }
    }
    let aliasing = mu.chernoff_upper_tail(size);
    let len = size.min(mu.support_len() + 1);
    let mut data = vec![0.0; len];
    data[1..].copy_from_slice(&mu.weights[..len - 1]);
    let total: f64 = mu.stored_total();
    let spec: Vec<Complex64> = fft::spectrum(&data, size)
        .into_iter()
        .map(|m| (m - total).exp())
        .collect();
    let mut values = fft::inverse(spec, size);
    values.truncate(window);
    for v in &mut values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let rounding = 32.0 * f64::EPSILON * (size as f64).log2() * (window as f64).sqrt();
    // Stored mass plus tail is one by construction; the aliasing and rounding
    // allowances are taken out of the stored entries.
    let stored: f64 = values.iter().sum();
    let tail = ((1.0 - stored).max(0.0) + aliasing + rounding).min(1.0);
    if stored > 0.0 {
        let scale = (1.0 - tail) / stored;
        for v in &mut values {
            *v *= scale;
        }
    }
    Ok(Pmf::from_parts(values, tail, 0.0)?)
}

/// Law of the fresh immigration `ε_n` at a single step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ImmigrationLaw {
    /// An explicitly tabulated law.
    Finite { pmf: Pmf },
    /// `Po(rate)`.
    Poisson { rate: f64 },
    /// `P(ε = 0) = 1 − scale`, `P(ε = j) = scale / (j (j + 1))` for `j ≥ 1`;
    /// heavy-tailed with infinite mean whenever `scale > 0`.
    Dilog { scale: f64 },
}

/// Window length that keeps the unrepresented mass of heavy-tailed laws
/// (and of the compound Poisson limits built from them) below `tolerance`.
pub fn window_for_tolerance(tolerance: f64) -> usize {
    const SPREAD: f64 = 2.62144;
    fft::smooth_size((SPREAD / tolerance * (1.0 - 1e-12)).ceil() as usize)
}

impl ImmigrationLaw {
    pub fn validate(&self) -> Result<(), LawError> {
        match *self {
            ImmigrationLaw::Finite { .. } => Ok(()),
            ImmigrationLaw::Poisson { rate } => {
                if rate.is_finite() && rate >= 0.0 {
                    Ok(())
                } else {
                    Err(LawError::Rate(rate))
                }
            }
            ImmigrationLaw::Dilog { scale } => check_probability(scale),
        }
    }

    /// Tabulated law with unrepresented mass below `tolerance`.
    pub fn pmf(&self, tolerance: f64) -> Result<Pmf, LawError> {
        match self {
            ImmigrationLaw::Finite { pmf } => Ok(pmf.clone()),
            ImmigrationLaw::Poisson { rate } => poisson(*rate, tolerance),
            ImmigrationLaw::Dilog { scale } => {
                // P(ε ≥ K) = scale / K.
                let len = ((scale / tolerance).floor() as usize + 1).max(1);
                if len > MAX_SUPPORT {
                    return Err(LawError::SupportTooLarge(len));
                }
                Ok(self.thinned_window(1.0, len)?)
            }
        }
    }

    /// Law of the `p`-thinned immigration, `Bi(L(ε), p)`.
    pub fn thinned(&self, p: f64, tolerance: f64) -> Result<Pmf, LawError> {
        check_probability(p)?;
        match self {
            ImmigrationLaw::Finite { pmf } => binomial_mixture(pmf, p),
            ImmigrationLaw::Poisson { rate } => poisson(rate * p, tolerance),
            ImmigrationLaw::Dilog { .. } => self.thinned_window(p, window_for_tolerance(tolerance)),
        }
    }

    /// The thinned law stored exactly on `[0, window)`; the remaining mass
    /// sits at `window` and beyond.
    pub fn thinned_window(&self, p: f64, window: usize) -> Result<Pmf, LawError> {
        check_probability(p)?;
        let window = window.max(1);
        match self {
            ImmigrationLaw::Dilog { scale } => Ok(thinned_dilog(*scale, p, window)),
            other => {
                let full = other.thinned(p, crate::pmf::DEFAULT_TOLERANCE)?;
                Ok(full.truncated(window))
            }
        }
    }

    /// Generating function `E z^ε` on the closed unit disk.
    pub fn gf(&self, z: Complex64) -> Complex64 {
        match self {
            ImmigrationLaw::Finite { pmf } => pmf.gf_eval_unchecked(z),
            ImmigrationLaw::Poisson { rate } => (rate * (z - 1.0)).exp(),
            ImmigrationLaw::Dilog { scale } => dilog_gf(*scale, z),
        }
    }

    /// Factorial moment `E ε(ε−1)⋯(ε−j+1)`; infinite for heavy-tailed laws.
    pub fn factorial_moment(&self, j: usize) -> Result<Moment, LawError> {
        match self {
            ImmigrationLaw::Finite { pmf } => Ok(pmf.factorial_moment(j)?),
            ImmigrationLaw::Poisson { rate } => {
                if j == 0 {
                    return Err(PmfError::ZeroOrder.into());
                }
                Ok(Moment { value: rate.powi(j as i32), lower_bound: false })
            }
            ImmigrationLaw::Dilog { scale } => {
                if j == 0 {
                    return Err(PmfError::ZeroOrder.into());
                }
                let value = if *scale > 0.0 { f64::INFINITY } else { 0.0 };
                Ok(Moment { value, lower_bound: false })
            }
        }
    }

    /// Factorial moment of the law restricted to `{0, …, cutoff}`, a lower
    /// bound of the full moment.
    pub fn truncated_factorial_moment(&self, j: usize, cutoff: usize) -> Result<f64, LawError> {
        let pmf = match self {
            ImmigrationLaw::Finite { pmf } => pmf.truncated(cutoff + 1),
            ImmigrationLaw::Poisson { rate } => poisson(*rate, 1e-15)?.truncated(cutoff + 1),
            ImmigrationLaw::Dilog { .. } => self.thinned_window(1.0, cutoff + 1)?,
        };
        Ok(pmf.factorial_moment(j)?.value)
    }

    /// Window hint for laws whose tails are too heavy to truncate by tolerance alone.
    pub fn window_hint(&self, tolerance: f64) -> Option<usize> {
        match self {
            ImmigrationLaw::Dilog { scale } if *scale > 0.0 => Some(window_for_tolerance(tolerance)),
            _ => None,
        }
    }

    pub fn is_heavy_tailed(&self) -> bool {
        matches!(self, ImmigrationLaw::Dilog { scale } if *scale > 0.0)
    }
}

/// `Bi(ε, p)` for the dilogarithm-type law with parameter `c`, on `[0, window)`.
///
/// With `q = 1 − p`, `Bi{0} = 1 + c p ln p / q` and `Bi{j} = c p I_j` where
/// `I_j = ∫₀¹ w^{j−1}(1−w)/(p + q w) dw` satisfies
/// `p I_j + q I_{j+1} = 1/(j(j+1))`. The recursion runs forwards when
/// `p ≤ ½` and backwards (seeded by a convergent series) otherwise, so the
/// error is damped in both regimes.
fn thinned_dilog(c: f64, p: f64, window: usize) -> Pmf {
    if c == 0.0 || p == 0.0 {
        return Pmf::dirac(0);
    }
    let q = 1.0 - p;
    let mut probs = vec![0.0; window];
    probs[0] = if q == 0.0 {
        1.0 - c
    } else if p > 0.5 {
        // p ln p / q with ln p = ln_1p(−q) to avoid cancellation near p = 1.
        1.0 + c * p * (-q).ln_1p() / q
    } else {
        1.0 + c * p * p.ln() / q
    };
    if window > 1 {
        // probs[j] holds I_j until the final scaling by c p.
        let pair = |j: usize| 1.0 / (j as f64 * (j + 1) as f64);
        if q == 0.0 {
            for (j, v) in probs.iter_mut().enumerate().skip(1) {
                *v = pair(j);
            }
        } else if p <= 0.5 {
            let inv_q = 1.0 / q;
            let mut current = (-p.ln() - q) * inv_q * inv_q;
            probs[1] = current;
            for j in 1..window - 1 {
                current = (pair(j) - p * current) * inv_q;
                probs[j + 1] = current;
            }
        } else {
            let inv_p = 1.0 / p;
            let last = window - 1;
            let mut current = dilog_integral_series(last, q);
            probs[last] = current;
            for j in (1..last).rev() {
                current = (pair(j) - q * current) * inv_p;
                probs[j] = current;
            }
        }
        let scale = c * p;
        for v in &mut probs[1..] {
            *v = (scale * *v).max(0.0);
        }
    }
    Pmf::from_lower_bounds(probs)
}

/// `I_j = Σ_r q^r (r+1)! / (j (j+1) ⋯ (j+r+1))`.
fn dilog_integral_series(j: usize, q: f64) -> f64 {
    let jf = j as f64;
    let mut term = 1.0 / (jf * (jf + 1.0));
    let mut sum = term;
    let mut r = 0.0;
    while term > sum * 1e-18 {
        term *= q * (r + 2.0) / (jf + r + 2.0);
        sum += term;
        r += 1.0;
        if r > 10_000.0 {
            break;
        }
    }
    sum
}

/// `1 + c (1 − z) ln(1 − z) / z`, continued by its power series near zero.
fn dilog_gf(c: f64, z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if (z - one).norm() == 0.0 {
        return one;
    }
    if z.norm() < 0.5 {
        // 1 − c + c Σ_{j≥1} z^j / (j (j+1))
        let mut acc = Complex64::new(0.0, 0.0);
        let mut zj = one;
        for j in 1..200 {
            zj *= z;
            let term = zj / (j as f64 * (j + 1) as f64);
            acc += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        return one - c + c * acc;
    }
    let w = one - z;
    one + c * w * w.ln() / z
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli(0.0).unwrap(), dirac(0));
        assert_eq!(bernoulli(1.0).unwrap(), dirac(1));
        assert_eq!(bernoulli(0.3).unwrap().probs(), &[0.7, 0.3]);
        assert!(bernoulli(1.5).is_err());
        assert!(bernoulli(-0.1).is_err());
    }

    #[test]
    fn dirac_examples() {
        assert_eq!(dirac(0).probs(), &[1.0]);
        assert_eq!(dirac(2).probs(), &[0.0, 0.0, 1.0]);
        let z = Complex64::new(0.3, 0.4);
        let v = dirac(3).gf_eval(z).unwrap().value;
        assert!((v - z * z * z).norm() < 1e-15);
    }

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson(0.0, 1e-12).unwrap(), dirac(0));
        let po = poisson(1.0, 1e-12).unwrap();
        assert!((po.mass(0) - (-1f64).exp()).abs() < 1e-15);
        assert!((13..=17).contains(&po.len()), "len {}", po.len());
        assert!(po.tail_mass() < 1e-12);
        assert!(poisson(-1.0, 1e-12).is_err());
        let big = poisson(900.0, 1e-12).unwrap();
        assert!((big.mean().value - 900.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_examples() {
        let mu = Pmf::canonicalize(vec![0.2, 0.5, 0.3], 0.0).unwrap();
        assert_eq!(binomial_mixture(&mu, 1.0).unwrap(), mu);
        let b = binomial_mixture(&dirac(3), 0.5).unwrap();
        for (x, y) in b.probs().iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert!((x - y).abs() < 1e-15);
        }
        let be = binomial_mixture(&bernoulli(0.4).unwrap(), 0.25).unwrap();
        assert!((be.mass(1) - 0.1).abs() < 1e-15);
        assert!((be.mass(0) - 0.9).abs() < 1e-15);
        assert!(binomial_mixture(&mu, 1.1).is_err());
    }

    #[test]
    fn compound_poisson_examples() {
        let unit = IntensityMeasure::new(vec![1.0]).unwrap();
        let cp = compound_poisson(&unit, 1e-13).unwrap();
        assert!(cp.tv_distance(&poisson(1.0, 1e-13).unwrap()).estimate < 1e-12);
        let two = IntensityMeasure::new(vec![0.5, 0.25]).unwrap();
        let cp = compound_poisson(&two, 1e-12).unwrap();
        assert!((cp.mass(0) - (-0.75f64).exp()).abs() < 1e-14);
        assert!((cp.mass(0) - 0.472367).abs() < 1e-6);
        let empty = IntensityMeasure::new(vec![]).unwrap();
        assert_eq!(compound_poisson(&empty, 1e-12).unwrap(), dirac(0));
    }

    #[test]
    fn compound_poisson_matches_gf() {
        let mu = IntensityMeasure::new(vec![0.3, 0.0, 0.2, 0.1]).unwrap();
        let cp = compound_poisson(&mu, 1e-13).unwrap();
        for z in [Complex64::new(0.5, 0.5), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.9)] {
            let expected = mu.log_gf(z).exp();
            assert!((cp.gf_eval(z).unwrap().value - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_route_agrees_with_convolution_route() {
        let weights: Vec<f64> = (1..=300).map(|j| 0.5 / (j * j) as f64).collect();
        let mu = IntensityMeasure::new(weights.clone()).unwrap();
        let fast = compound_poisson(&mu, 1e-12).unwrap();
        let slow = cp_by_convolution(&mu, 1e-12).unwrap();
        assert!(fast.tv_distance(&slow).estimate < 1e-11);
        assert!(fast.tail_mass() < 1e-11);
    }

    #[test]
    fn truncated_measure_keeps_lower_bounds() {
        // μ{j} = 1/j² truncated at J = 400 with the exact total declared.
        let j_max = 400usize;
        let weights: Vec<f64> = (1..=j_max).map(|j| 1.0 / (j * j) as f64).collect();
        let declared = std::f64::consts::PI.powi(2) / 6.0;
        let mu = IntensityMeasure::with_tail(weights, Some(declared), 1.0 / j_max as f64).unwrap();
        let cp = compound_poisson(&mu, 1e-2).unwrap();
        assert_eq!(cp.len(), j_max + 1);
        assert!((cp.mass(0) - (-declared).exp()).abs() < 1e-12, "{} {} {}", cp.mass(0), (-declared).exp(), cp.tail_mass());
        assert!(cp.tail_mass() > 1.0 / j_max as f64);
        let too_strict = compound_poisson(&mu, 1e-6);
        assert!(matches!(too_strict, Err(LawError::TailTooLarge { .. })));
    }

    #[test]
    fn intensity_validation() {
        assert!(IntensityMeasure::new(vec![1.0, -0.5]).is_err());
        assert!(IntensityMeasure::with_tail(vec![1.0], Some(0.5), 0.0).is_err());
        assert!(IntensityMeasure::with_tail(vec![1.0], Some(1.1), 0.2).is_ok());
        let parsed: IntensityMeasure = serde_json::from_str(r#"{"weights":[1.0,0.5]}"#).unwrap();
        assert_eq!(parsed.weight(2), 0.5);
        assert!(serde_json::from_str::<IntensityMeasure>(r#"{"weights":[-1.0]}"#).is_err());
    }

    #[test]
    fn chernoff_bound_is_valid() {
        let mu = IntensityMeasure::new(vec![1.0]).unwrap();
        let po = poisson(1.0, 1e-16).unwrap();
        for level in [3usize, 6, 10] {
            let exact: f64 = po.probs()[level..].iter().sum();
            assert!(mu.chernoff_upper_tail(level) >= exact);
        }
    }

    /// Direct summation of Σ_ℓ C(ℓ, j) p^j q^{ℓ−j} c/(ℓ(ℓ+1)) over a long range.
    fn thinned_dilog_by_series(c: f64, p: f64, j: usize, terms: usize) -> f64 {
        let q = 1.0 - p;
        let mut total = 0.0;
        for l in j.max(1)..terms {
            let log_c = ln_gamma(l as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((l - j) as f64 + 1.0);
            let w = (log_c + j as f64 * p.ln() + (l - j) as f64 * q.ln()).exp();
            total += w * c / (l as f64 * (l + 1) as f64);
        }
        total
    }

    #[test]
    fn thinned_dilog_matches_direct_series() {
        for &p in &[0.05, 0.3, 0.5, 0.7, 0.95] {
            let law = thinned_dilog(0.2, p, 40);
            for j in 1..6 {
                let direct = thinned_dilog_by_series(0.2, p, j, 200_000);
                assert!((law.mass(j) - direct).abs() < 1e-9 * direct.max(1e-6), "p={p} j={j}");
            }
            let mut zero = 0.8;
            let q: f64 = 1.0 - p;
            for l in 1..200_000 {
                zero += 0.2 * q.powi(l) / (l as f64 * (l + 1) as f64);
            }
            assert!((law.mass(0) - zero).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn thinned_dilog_matches_generic_mixture() {
        let law = ImmigrationLaw::Dilog { scale: 0.5 };
        let raw = law.pmf(1e-5).unwrap();
        for &p in &[0.2, 0.6] {
            let generic = binomial_mixture(&raw.truncated(400), p).unwrap();
            let closed = law.thinned_window(p, 100).unwrap();
            for j in 0..60 {
                // The generic mixture misses the mass thinned down from ℓ ≥ 400.
                assert!((generic.mass(j) - closed.mass(j)).abs() < 5e-3 / 400.0, "j={j}");
                assert!(generic.mass(j) <= closed.mass(j) + 1e-15);
            }
        }
    }

    #[test]
    fn dilog_law_basics() {
        let law = ImmigrationLaw::Dilog { scale: 0.1 };
        let pmf = law.pmf(1e-6).unwrap();
        assert!((pmf.mass(1) - 0.05).abs() < 1e-15);
        assert!((pmf.mass(0) - 0.9).abs() < 1e-15);
        assert!(pmf.tail_mass() < 1e-6);
        assert!(law.factorial_moment(1).unwrap().value.is_infinite());
        let small = law.truncated_factorial_moment(1, 100).unwrap();
        let large = law.truncated_factorial_moment(1, 10_000).unwrap();
        assert!(large > small + 0.4);
        for z in [Complex64::new(0.2, 0.1), Complex64::new(-0.9, 0.3), Complex64::new(0.0, -1.0)] {
            let direct = pmf.gf_eval(z).unwrap().value;
            assert!((law.gf(z) - direct).norm() < 2e-6, "z={z}");
        }
        assert_eq!(law.gf(Complex64::new(1.0, 0.0)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn window_rule() {
        assert_eq!(window_for_tolerance(1e-6), 2_621_440);
    }

    fn small_pmf() -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, 1..=30).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 0.0).then(|| Pmf::canonicalize(w.iter().map(|x| x / s).collect(), 0.0).unwrap())
        })
    }

    proptest! {
        #[test]
        fn thinning_composes(mu in small_pmf(), p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let twice = binomial_mixture(&binomial_mixture(&mu, p).unwrap(), q).unwrap();
            let once = binomial_mixture(&mu, p * q).unwrap();
            prop_assert!(twice.tv_distance(&once).estimate < 1e-12);
        }

        #[test]
        fn thinned_bernoulli_is_bernoulli(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let b = binomial_mixture(&bernoulli(p).unwrap(), q).unwrap();
            let e = bernoulli(p * q).unwrap();
            prop_assert!((b.mass(0) - e.mass(0)).abs() < 1e-15);
            prop_assert!((b.mass(1) - e.mass(1)).abs() < 1e-15);
        }

        #[test]
        fn thinning_scales_mean(mu in small_pmf(), p in 0.0f64..=1.0) {
            let m = binomial_mixture(&mu, p).unwrap().mean().value;
            prop_assert!((m - p * mu.mean().value).abs() < 1e-12);
        }

        #[test]
        fn compound_poisson_superposition(
            a in prop::collection::vec(0.0f64..0.5, 1..6),
            b in prop::collection::vec(0.0f64..0.5, 1..6),
        ) {
            let ma = IntensityMeasure::new(a).unwrap();
            let mb = IntensityMeasure::new(b).unwrap();
            let lhs = compound_poisson(&ma, 1e-14).unwrap().convolve(&compound_poisson(&mb, 1e-14).unwrap());
            let rhs = compound_poisson(&ma.add(&mb), 1e-14).unwrap();
            prop_assert!(lhs.tv_distance(&rhs).estimate < 1e-10);
        }

        #[test]
        fn compound_poisson_mean(w in prop::collection::vec(0.0f64..0.7, 1..8)) {
            let mu = IntensityMeasure::new(w.clone()).unwrap();
            let cp = compound_poisson(&mu, 1e-14).unwrap();
            let expected: f64 = w.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
            let m = cp.factorial_moment(1).unwrap();
            prop_assert!(m.value <= expected + 1e-10);
            prop_assert!(expected - m.value < 1e-8);
        }
    }
}
