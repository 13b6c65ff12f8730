//! The inhomogeneous INAR(1) model `X_n = ρ_n ∘ X_{n−1} + ε_n`, `X_0 = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laws::{self, ImmigrationLaw, LawError};
use crate::pmf::{Moment, Pmf, PmfError, WindowedProduct, DISK_SLACK};

/// Explicit schedules are capped at this many entries.
pub const MAX_EXPLICIT_LEN: usize = 1_000_000;
/// Mass allowed above the state cap of the brute-force program.
pub const STATE_CAP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("offspring mean rho_{n} = {value} is outside [0, 1)")]
    Rho { n: usize, value: f64 },
    #[error("schedule has no entry for n = {0}")]
    Undefined(usize),
    #[error("explicit schedule has {0} entries, more than the cap of 1e6")]
    TooLong(usize),
    #[error("immigration at n = {n} is invalid: {reason}")]
    Immigration { n: usize, reason: String },
    #[error("index pair k = {k}, n = {n} is invalid (need 1 <= k <= n)")]
    Index { k: usize, n: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("|z| = {0} lies outside the closed unit disk")]
    OutsideUnitDisk(f64),
    #[error("accumulated tail {tail:e} exceeds ten times the tolerance {tolerance:e}")]
    Tolerance { tail: f64, tolerance: f64 },
    #[error("mass {mass:e} escaped above the state cap {cap}")]
    StateCap { mass: f64, cap: usize },
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

/// `scale / (n + shift)^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "unit_exponent")]
    pub exponent: f64,
}

fn unit_exponent() -> f64 {
    1.0
}

impl Decay {
    pub fn harmonic(scale: f64) -> Self {
        Decay { scale, shift: 0.0, exponent: 1.0 }
    }

    pub fn value(&self, n: usize) -> f64 {
        let base = n as f64 + self.shift;
        if self.exponent == 1.0 {
            self.scale / base
        } else {
            self.scale / base.powf(self.exponent)
        }
    }
}

/// Offspring means `ρ_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhoSchedule {
    Constant { value: f64 },
    /// `ρ_n = 1 − min(1, decay(n))`.
    NearCritical { decay: Decay },
    /// `values[n − 1] = ρ_n`.
    Explicit { values: Vec<f64> },
}

impl RhoSchedule {
    /// `ρ_{[k,n]} = Π_{ℓ=k+1}^n ρ_ℓ` for `k = 1..=n`, stored at index `k − 1`.
    ///
    /// The suffix products are accumulated with an error-free product
    /// transformation so thousands of near-one factors do not drift.
    pub fn products(&self, n: usize) -> Result<Vec<f64>, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroHorizon);
        }
        Ok(suffix_products(&self.values(n)?))
    }

    /// `ρ_1, …, ρ_n`.
    pub fn values(&self, n: usize) -> Result<Vec<f64>, ModelError> {
        (1..=n).map(|k| self.rho(k)).collect()
    }

    pub fn rho(&self, n: usize) -> Result<f64, ModelError> {
        if n == 0 {
            return Err(ModelError::Undefined(0));
        }
        let value = match self {
            RhoSchedule::Constant { value } => *value,
            RhoSchedule::NearCritical { decay } => 1.0 - decay.value(n).min(1.0),
            RhoSchedule::Explicit { values } => {
                if values.len() > MAX_EXPLICIT_LEN {
                    return Err(ModelError::TooLong(values.len()));
                }
                *values.get(n - 1).ok_or(ModelError::Undefined(n))?
            }
        };
        if !(0.0..1.0).contains(&value) {
            return Err(ModelError::Rho { n, value });
        }
        Ok(value)
    }
}

/// Suffix products `Π_{ℓ>k} ρ_ℓ` of `rhos[ℓ − 1] = ρ_ℓ`, accumulated with an
/// error-free product transformation.
pub(crate) fn suffix_products(rhos: &[f64]) -> Vec<f64> {
    let n = rhos.len();
    let mut out = vec![0.0; n];
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    for k in (1..n).rev() {
        let r = rhos[k];
        let p = hi * r;
        let err = hi.mul_add(r, -p);
        lo = lo * r + err;
        hi = p;
        out[k - 1] = hi + lo;
    }
    out
}

/// Immigration laws `L(ε_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ImmigrationSchedule {
    Constant { law: ImmigrationLaw },
    /// `ε_n ~ Be(min(1, decay(n)))`.
    Bernoulli { decay: Decay },
    /// `ε_n ~ Po(decay(n))`.
    Poisson { decay: Decay },
    /// `P(ε_n = i) = weights[i − 1] · decay(n)` for `i ≥ 1`, the rest at zero.
    Scaled { weights: Vec<f64>, decay: Decay },
    /// `P(ε_n = j) = decay(n) / (j (j + 1))` for `j ≥ 1`.
    Dilog { decay: Decay },
    /// `laws[n − 1] = L(ε_n)`.
    Explicit { laws: Vec<ImmigrationLaw> },
}

impl ImmigrationSchedule {
    pub fn law(&self, n: usize) -> Result<ImmigrationLaw, ModelError> {
        if n == 0 {
            return Err(ModelError::Undefined(0));
        }
        let bad = |reason: String| ModelError::Immigration { n, reason };
        let law = match self {
            ImmigrationSchedule::Constant { law } => law.clone(),
            ImmigrationSchedule::Bernoulli { decay } => {
                let p = decay.value(n).min(1.0);
                ImmigrationLaw::Finite {
                    pmf: laws::bernoulli(p).map_err(|e| bad(e.to_string()))?,
                }
            }
            ImmigrationSchedule::Poisson { decay } => ImmigrationLaw::Poisson { rate: decay.value(n) },
            ImmigrationSchedule::Scaled { weights, decay } => {
                let d = decay.value(n);
                let mut probs = Vec::with_capacity(weights.len() + 1);
                probs.push(0.0);
                probs.extend(weights.iter().map(|w| w * d));
                let positive: f64 = probs.iter().sum();
                if !(0.0..=1.0 + 1e-12).contains(&positive) || probs.iter().any(|p| *p < 0.0) {
                    return Err(bad(format!("scaled weights give P(eps >= 1) = {positive}")));
                }
                probs[0] = (1.0 - positive).max(0.0);
                ImmigrationLaw::Finite {
                    pmf: Pmf::canonicalize(probs, 0.0).map_err(|e| bad(e.to_string()))?,
                }
            }
            ImmigrationSchedule::Dilog { decay } => ImmigrationLaw::Dilog { scale: decay.value(n) },
            ImmigrationSchedule::Explicit { laws } => {
                if laws.len() > MAX_EXPLICIT_LEN {
                    return Err(ModelError::TooLong(laws.len()));
                }
                laws.get(n - 1).cloned().ok_or(ModelError::Undefined(n))?
            }
        };
        law.validate().map_err(|e| bad(e.to_string()))?;
        Ok(law)
    }
}

/// A fully specified inhomogeneous INAR(1) model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub rho: RhoSchedule,
    pub immigration: ImmigrationSchedule,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, rho: RhoSchedule, immigration: ImmigrationSchedule) -> Self {
        ModelSpec { name: name.into(), rho, immigration }
    }

    pub fn rho(&self, n: usize) -> Result<f64, ModelError> {
        self.rho.rho(n)
    }

    pub fn immigration(&self, n: usize) -> Result<ImmigrationLaw, ModelError> {
        self.immigration.law(n)
    }

    /// Checks every schedule entry up to `n`.
    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        for m in 1..=n {
            self.rho(m)?;
            self.immigration(m)?;
        }
        Ok(())
    }

    /// `ρ_{[k,n]}` for `k = 1..=n`, stored at index `k − 1`.
    pub fn rho_products(&self, n: usize) -> Result<Vec<f64>, ModelError> {
        self.rho.products(n)
    }

    /// `ρ_{[k,n]} = Π_{ℓ=k+1}^n ρ_ℓ`.
    pub fn rho_product(&self, k: usize, n: usize) -> Result<f64, ModelError> {
        if k == 0 || k > n {
            return Err(ModelError::Index { k, n });
        }
        Ok(self.rho_products(n)?[k - 1])
    }
}

/// Exact law of `X_n` as the convolution over `k` of `Bi(L(ε_k), ρ_{[k,n]})`,
/// taken in ascending `k`.
///
/// Each factor and each partial product is trimmed with a share
/// `tolerance / n` of the budget. Heavy-tailed immigration switches to a
/// fixed window on which every factor, and hence the product, is exact; the
/// windowed factors are multiplied in the frequency domain.
pub fn exact_law(model: &ModelSpec, n: usize, tolerance: f64) -> Result<Pmf, ModelError> {
    let products = model.rho_products(n)?;
    let laws = (1..=n).map(|k| model.immigration(k)).collect::<Result<Vec<_>, _>>()?;
    let window = laws.iter().filter_map(|l| l.window_hint(tolerance)).max();
    let acc = match window {
        Some(w) => {
            let mut product = WindowedProduct::new(w);
            for (law, &p) in laws.iter().zip(&products) {
                product.push(&law.thinned_window(p, w)?);
            }
            product.finish()
        }
        None => {
            let share = tolerance / (2 * n) as f64;
            let mut acc = Pmf::dirac(0);
            for (law, &p) in laws.iter().zip(&products) {
                acc = acc.convolve(&law.thinned(p, share)?.trimmed(share)).trimmed(share);
            }
            acc
        }
    };
    if acc.tail_mass() > 10.0 * tolerance {
        return Err(ModelError::Tolerance { tail: acc.tail_mass(), tolerance });
    }
    Ok(acc)
}

fn check_disk(z: Complex64) -> Result<(), ModelError> {
    let r = z.norm();
    if r > 1.0 + DISK_SLACK {
        Err(ModelError::OutsideUnitDisk(r))
    } else {
        Ok(())
    }
}

/// `F_n(z) = Π_k H_k(1 + ρ_{[k,n]}(z − 1))`.
pub fn gf_product(model: &ModelSpec, n: usize, z: Complex64) -> Result<Complex64, ModelError> {
    check_disk(z)?;
    let products = model.rho_products(n)?;
    let mut acc = Complex64::new(1.0, 0.0);
    for (k, &p) in (1..=n).zip(&products) {
        acc *= model.immigration(k)?.gf(1.0 + p * (z - 1.0));
    }
    Ok(acc)
}

/// `F_n(z) = F_{n−1}(G_n(z)) H_n(z)` with `G_n(z) = 1 + ρ_n(z − 1)` and `F_0 ≡ 1`,
/// unrolled from the top so every argument stays in the disk.
pub fn gf_recursive(model: &ModelSpec, n: usize, z: Complex64) -> Result<Complex64, ModelError> {
    check_disk(z)?;
    if n == 0 {
        return Err(ModelError::ZeroHorizon);
    }
    let mut w = z;
    let mut acc = Complex64::new(1.0, 0.0);
    for m in (1..=n).rev() {
        acc *= model.immigration(m)?.gf(w);
        w = 1.0 + model.rho(m)? * (w - 1.0);
    }
    Ok(acc)
}

/// `E X_n` by `E X_n = ρ_n E X_{n−1} + m_{n,1}`.
pub fn mean(model: &ModelSpec, n: usize) -> Result<Moment, ModelError> {
    let mut value = 0.0;
    let mut lower_bound = false;
    for m in 1..=n {
        let moment = model.immigration(m)?.factorial_moment(1)?;
        lower_bound |= moment.lower_bound;
        value = model.rho(m)? * value + moment.value;
    }
    Ok(Moment { value, lower_bound })
}

/// Forward dynamic program on the transition kernel, used as an oracle.
///
/// `P(X_n = x) = Σ_y P(X_{n−1} = y) Σ_b Bin(y, ρ_n){b} P(ε_n = x − b)`,
/// with states restricted to `0..=state_cap`.
pub fn brute_force_law(model: &ModelSpec, n: usize, state_cap: usize) -> Result<Pmf, ModelError> {
    if n == 0 {
        return Err(ModelError::ZeroHorizon);
    }
    let mut dist = vec![1.0];
    let mut escaped = 0.0;
    for step in 1..=n {
        let rho = model.rho(step)?;
        let eps = model.immigration(step)?.pmf(1e-16)?;
        escaped += eps.tail_mass();

        // Survivors: push each state's mass through its Binomial row, built
        // one Bernoulli trial at a time.
        let mut survivors = vec![0.0; dist.len()];
        let mut row = vec![1.0];
        for (y, &py) in dist.iter().enumerate() {
            if y > 0 {
                let mut next = vec![0.0; y + 1];
                for (b, &r) in row.iter().enumerate() {
                    next[b] += r * (1.0 - rho);
                    next[b + 1] += r * rho;
                }
                row = next;
            }
            if py != 0.0 {
                for (b, &r) in row.iter().enumerate() {
                    survivors[b] += py * r;
                }
            }
        }

        let len = (survivors.len() + eps.len() - 1).min(state_cap + 1);
        let mut next = vec![0.0; len];
        for (b, &s) in survivors.iter().enumerate() {
            for (e, &pe) in eps.probs().iter().enumerate() {
                let x = b + e;
                if x <= state_cap {
                    next[x] += s * pe;
                } else {
                    escaped += s * pe;
                }
            }
        }
        dist = next;
    }
    if escaped > STATE_CAP_SLACK {
        return Err(ModelError::StateCap { mass: escaped, cap: state_cap });
    }
    Ok(Pmf::from_lower_bounds(dist))
}

/// One entry `(L(ζ_{n,k}), p_{n,k})` of a triangular array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangularEntry {
    pub law: Pmf,
    pub p: f64,
}

/// Row-wise independent arrays `ζ_{n,k}` thinned by `p_{n,k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TriangularSpec {
    /// `rows[n − 1]` is row `n`.
    Explicit { rows: Vec<Vec<TriangularEntry>> },
    /// Row `n` holds `k_n = per_n · n` copies of `(law, lambda / k_n)`.
    Uniform { law: Pmf, lambda: f64, per_n: usize },
}

impl TriangularSpec {
    pub fn row_len(&self, n: usize) -> Result<usize, ModelError> {
        match self {
            TriangularSpec::Explicit { rows } => {
                rows.get(n.wrapping_sub(1)).map(Vec::len).ok_or(ModelError::Undefined(n))
            }
            TriangularSpec::Uniform { per_n, .. } => Ok(per_n * n),
        }
    }

    pub fn row(&self, n: usize) -> Result<Vec<TriangularEntry>, ModelError> {
        if n == 0 {
            return Err(ModelError::Undefined(0));
        }
        match self {
            TriangularSpec::Explicit { rows } => rows.get(n - 1).cloned().ok_or(ModelError::Undefined(n)),
            TriangularSpec::Uniform { law, lambda, per_n } => {
                let k = per_n * n;
                let p = lambda / k as f64;
                if !(0.0..=1.0).contains(&p) {
                    return Err(ModelError::Immigration { n, reason: format!("p = {p} outside [0, 1]") });
                }
                Ok(vec![TriangularEntry { law: law.clone(), p }; k])
            }
        }
    }
}

/// Law of `Σ_k ρ_{n,k} ∘ ζ_{n,k}`: the convolution across row `n` of `Bi(L(ζ_{n,k}), p_{n,k})`.
pub fn triangular_law(spec: &TriangularSpec, n: usize, tolerance: f64) -> Result<Pmf, ModelError> {
    let row = spec.row(n)?;
    let share = tolerance / (2 * row.len().max(1)) as f64;
    let mut acc = Pmf::dirac(0);
    for entry in &row {
        let factor = laws::binomial_mixture(&entry.law, entry.p)?;
        acc = acc.convolve(&factor.trimmed(share)).trimmed(share);
    }
    if acc.tail_mass() > 10.0 * tolerance {
        return Err(ModelError::Tolerance { tail: acc.tail_mass(), tolerance });
    }
    Ok(acc)
}
