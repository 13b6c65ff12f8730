//! Truncated probability mass functions on the non-negative integers.
//!
//! A [`Pmf`] stores the masses `probs[j] = P{j}` for `j < probs.len()` and a
//! `tail_mass` for everything that is not represented. The tail is carried
//! through every operation and never redistributed, so the stored entries are
//! always lower bounds of the true masses and every distance computed from
//! them comes with a rigorous interval.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;

/// Default truncation tolerance for infinite-support laws.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Allowed deviation of `sum(probs) + tail_mass` from one.
pub const UNIT_MASS_SLACK: f64 = 1e-12;
/// Raw input whose mass deviates more than this from one is rejected.
pub const NORMALIZATION_SLACK: f64 = 1e-9;
/// Negative entries down to this magnitude are floating cancellation and get clipped.
pub const NEGATIVE_CLIP: f64 = 1e-15;
/// Slack on the unit-disk check for generating-function arguments.
pub const DISK_SLACK: f64 = 1e-12;

const DIRECT_CONVOLUTION_MAX: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("entry {index} is negative ({value:e})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {0} is not finite")]
    NonFinite(usize),
    #[error("tail mass {0:e} is negative or not finite")]
    InvalidTail(f64),
    #[error("total mass {total} deviates from 1 by more than 1e-9")]
    NotNormalized { total: f64 },
    #[error("|z| = {0} lies outside the closed unit disk")]
    OutsideUnitDisk(f64),
    #[error("factorial moment order must be positive")]
    ZeroOrder,
}

/// A probability mass function on `{0, 1, 2, ...}` with explicit tail mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf")]
pub struct Pmf {
    probs: Vec<f64>,
    tail_mass: f64,
}

#[derive(Deserialize)]
struct RawPmf {
    probs: Vec<f64>,
    #[serde(default)]
    tail_mass: f64,
}

impl TryFrom<RawPmf> for Pmf {
    type Error = PmfError;

    fn try_from(raw: RawPmf) -> Result<Self, Self::Error> {
        Pmf::from_parts(raw.probs, raw.tail_mass, 0.0)
    }
}

/// Total-variation distance with a rigorous enclosing interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvDistance {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TvDistance {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Generating-function value together with the radius that absorbs the tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GfValue {
    pub value: Complex64,
    pub error_radius: f64,
}

/// A moment computed over the stored support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub value: f64,
    /// Set when unrepresented tail mass may add to the value.
    pub lower_bound: bool,
}

impl Pmf {
    /// Builds a pmf from a raw mass sequence that must sum to one.
    ///
    /// Trailing mass below `tolerance` is moved into the tail.
    pub fn canonicalize(raw: Vec<f64>, tolerance: f64) -> Result<Self, PmfError> {
        Self::from_parts(raw, 0.0, tolerance)
    }

    /// Builds a pmf from stored masses and an explicit tail.
    pub fn from_parts(mut probs: Vec<f64>, tail_mass: f64, tolerance: f64) -> Result<Self, PmfError> {
        if !tail_mass.is_finite() || tail_mass < -NEGATIVE_CLIP {
            return Err(PmfError::InvalidTail(tail_mass));
        }
        let mut tail_mass = tail_mass.max(0.0);
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(PmfError::NonFinite(index));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_CLIP {
                    return Err(PmfError::NegativeEntry { index, value: *p });
                }
                *p = 0.0;
            }
        }
        let stored: f64 = probs.iter().sum();
        let total = stored + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(PmfError::NotNormalized { total });
        }
        if tail_mass > 1.0 {
            tail_mass = 1.0;
        }
        if (total - 1.0).abs() > f64::EPSILON && stored > 0.0 {
            let scale = (1.0 - tail_mass) / stored;
            for p in &mut probs {
                *p *= scale;
            }
        }
        let mut pmf = Pmf { probs, tail_mass };
        pmf.trim(tolerance);
        Ok(pmf)
    }

    /// Point mass at `k`.
    pub fn dirac(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Pmf { probs, tail_mass: 0.0 }
    }

    /// Internal constructor for masses that are already non-negative and
    /// consistent; recomputes the tail as the missing mass.
    pub(crate) fn from_lower_bounds(mut probs: Vec<f64>) -> Self {
        for p in &mut probs {
            if *p < 0.0 || !p.is_finite() {
                *p = 0.0;
            }
        }
        let stored: f64 = probs.iter().sum();
        if stored > 1.0 {
            let scale = 1.0 / stored;
            for p in &mut probs {
                *p *= scale;
            }
        }
        let tail_mass = (1.0 - stored).max(0.0);
        let mut pmf = Pmf { probs, tail_mass };
        pmf.trim(0.0);
        pmf
    }

    fn trim(&mut self, tolerance: f64) {
        let mut acc = 0.0;
        while self.probs.len() > 1 {
            let last = *self.probs.last().unwrap();
            if last == 0.0 || acc + last < tolerance {
                acc += last;
                self.probs.pop();
            } else {
                break;
            }
        }
        if self.probs.is_empty() {
            self.probs.push(0.0);
        }
        self.tail_mass += acc;
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stored mass at `j` (zero beyond the stored support).
    pub fn mass(&self, j: usize) -> f64 {
        self.probs.get(j).copied().unwrap_or(0.0)
    }

    pub fn is_tail_free(&self) -> bool {
        self.tail_mass == 0.0
    }

    pub fn into_parts(self) -> (Vec<f64>, f64) {
        (self.probs, self.tail_mass)
    }

    /// Moves trailing entries whose combined mass is below `tolerance` into the tail.
    pub fn trimmed(mut self, tolerance: f64) -> Pmf {
        self.trim(tolerance);
        self
    }

    /// Moves all stored mass at indices `>= max_len` into the tail.
    pub fn truncated(&self, max_len: usize) -> Pmf {
        let max_len = max_len.max(1);
        if self.probs.len() <= max_len {
            return self.clone();
        }
        let dropped: f64 = self.probs[max_len..].iter().sum();
        let mut pmf = Pmf {
            probs: self.probs[..max_len].to_vec(),
            tail_mass: self.tail_mass + dropped,
        };
        pmf.trim(0.0);
        pmf
    }

    /// Convolution `self * other`.
    ///
    /// Short operands use the direct sum; longer ones go through a real FFT,
    /// after which entries below the transform's rounding floor are cleared.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        self.convolve_truncated(other, usize::MAX)
    }

    /// Convolution restricted to the first `max_len` entries; the rest of the
    /// mass joins the tail.
    pub fn convolve_truncated(&self, other: &Pmf, max_len: usize) -> Pmf {
        let full = self.len() + other.len() - 1;
        let out_len = full.min(max_len.max(1));
        let probs = if self.len().min(other.len()) <= DIRECT_CONVOLUTION_MAX {
            direct_convolution(&self.probs, &other.probs, out_len)
        } else {
            fft_convolution(&self.probs, &other.probs, out_len)
        };
        // Stored mass of the product is the product of stored masses, so the
        // tail is ta + tb - ta*tb plus whatever was cut off.
        let known = (1.0 - self.tail_mass) * (1.0 - other.tail_mass);
        let stored: f64 = probs.iter().sum();
        let tail = if out_len == full {
            1.0 - known
        } else {
            (1.0 - stored).max(1.0 - known)
        };
        let mut probs = probs;
        if stored > 0.0 && out_len == full {
            let scale = known / stored;
            if (scale - 1.0).abs() > f64::EPSILON {
                for p in &mut probs {
                    *p *= scale;
                }
            }
        }
        let mut pmf = Pmf {
            probs,
            tail_mass: tail.clamp(0.0, 1.0),
        };
        pmf.trim(0.0);
        pmf
    }

    /// Total-variation distance `½ Σ |a{j} - b{j}|` over the union support,
    /// with the tails contributing `½ |ta - tb|` to the estimate and
    /// `½ (ta + tb)` to the half-width of the interval.
    pub fn tv_distance(&self, other: &Pmf) -> TvDistance {
        let n = self.len().max(other.len());
        let body: f64 = (0..n).map(|j| (self.mass(j) - other.mass(j)).abs()).sum::<f64>() * 0.5;
        let estimate = (body + 0.5 * (self.tail_mass - other.tail_mass).abs()).clamp(0.0, 1.0);
        let slack = 0.5 * (self.tail_mass + other.tail_mass);
        TvDistance {
            estimate,
            lower: (estimate - slack).clamp(0.0, 1.0),
            upper: (estimate + slack).clamp(0.0, 1.0),
        }
    }

    /// Generating function `Σ a{j} z^j` on the closed unit disk.
    pub fn gf_eval(&self, z: Complex64) -> Result<GfValue, PmfError> {
        let r = z.norm();
        if r > 1.0 + DISK_SLACK {
            return Err(PmfError::OutsideUnitDisk(r));
        }
        Ok(GfValue {
            value: self.gf_eval_unchecked(z),
            error_radius: self.tail_mass,
        })
    }

    pub(crate) fn gf_eval_unchecked(&self, z: Complex64) -> Complex64 {
        self.probs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &p| acc * z + p)
    }

    /// Factorial moment `Σ ℓ(ℓ-1)⋯(ℓ-j+1) a{ℓ}` over the stored support.
    pub fn factorial_moment(&self, j: usize) -> Result<Moment, PmfError> {
        if j == 0 {
            return Err(PmfError::ZeroOrder);
        }
        let value = self
            .probs
            .iter()
            .enumerate()
            .skip(j)
            .map(|(l, &p)| falling_factorial(l, j) * p)
            .sum();
        Ok(Moment {
            value,
            lower_bound: self.tail_mass > 0.0,
        })
    }

    pub fn mean(&self) -> Moment {
        self.factorial_moment(1).expect("order 1 is positive")
    }
}

/// `l (l-1) ⋯ (l-j+1)` as a float.
pub fn falling_factorial(l: usize, j: usize) -> f64 {
    if j > l {
        return 0.0;
    }
    (0..j).map(|i| (l - i) as f64).product()
}

fn direct_convolution(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![0.0; out_len];
    for (i, &x) in short.iter().enumerate() {
        if x == 0.0 || i >= out_len {
            continue;
        }
        let span = (out_len - i).min(long.len());
        for (o, &y) in out[i..i + span].iter_mut().zip(&long[..span]) {
            *o += x * y;
        }
    }
    out
}

/// FFT convolution of two mass sequences.
///
/// The operand with the larger atom at zero is split as `b0 δ0 + rest`, so
/// the transform only carries `rest` and its rounding noise scales with the
/// small part.
/// Exponents `a` of the Chernoff parameters `θ = a / window` used to bound
/// wrap-around in [`WindowedProduct`].
const WRAP_EXPONENTS: [f64; 4] = [10.0, 15.0, 20.0, 25.0];

/// Product of many laws restricted to its first `window` entries, computed by
/// multiplying spectra at one fixed cyclic length.
///
/// Entries below `window` of a product only involve entries below `window` of
/// the factors, so each factor is cut there. The cyclic product then exceeds
/// the linear one by mass wrapped around from degrees `≥ size`; that excess is
/// non-negative and at most `Π_k f_k(e^θ) e^{−θ size}`, which is added to the
/// tail.
pub(crate) struct WindowedProduct {
    window: usize,
    size: usize,
    spectrum: Vec<Complex64>,
    log_mgf: [f64; WRAP_EXPONENTS.len()],
}

impl WindowedProduct {
    pub(crate) fn new(window: usize) -> Self {
        let window = window.max(1);
        // The wrap bound behaves like exp(e^a / (a window) − a size / window):
        // long windows get away with half a window of padding (about 1e−11
        // at a = 17), short ones are cheap to pad generously.
        let size = if window >= 1 << 20 {
            fft::smooth_size(window + window / 2)
        } else {
            fft::smooth_size(4 * window)
        };
        WindowedProduct {
            window,
            size,
            spectrum: vec![Complex64::new(1.0, 0.0); size / 2 + 1],
            log_mgf: [0.0; WRAP_EXPONENTS.len()],
        }
    }

    pub(crate) fn push(&mut self, factor: &Pmf) {
        let probs = &factor.probs[..factor.len().min(self.window)];
        if let [only] = probs {
            // A point mass at zero only scales the product.
            for s in &mut self.spectrum {
                *s *= *only;
            }
        } else {
            for (s, f) in self.spectrum.iter_mut().zip(fft::spectrum(probs, self.size)) {
                *s *= f;
            }
        }
        for (acc, a) in self.log_mgf.iter_mut().zip(WRAP_EXPONENTS) {
            let r = (a / self.window as f64).exp();
            let mut w = 1.0;
            let mut sum = 0.0;
            for &p in probs {
                sum += p * w;
                w *= r;
            }
            *acc += sum.ln();
        }
    }

    pub(crate) fn finish(self) -> Pmf {
        let wrapped = self
            .log_mgf
            .iter()
            .zip(WRAP_EXPONENTS)
            .map(|(l, a)| (l - a * self.size as f64 / self.window as f64).exp())
            .fold(f64::INFINITY, f64::min)
            * (1.0 + 1e-6);
        let mut probs = fft::inverse(self.spectrum, self.size);
        probs.truncate(self.window);
        for p in &mut probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        // Stored entries exceed the true ones by at most `wrapped` in total,
        // so the tail carries that allowance on top of the missing mass.
        let stored: f64 = probs.iter().sum();
        let tail = ((1.0 - stored).max(0.0) + wrapped).min(1.0);
        let mut pmf = Pmf { probs, tail_mass: tail };
        pmf.trim(0.0);
        pmf
    }
}

pub(crate) fn fft_convolution(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    let (base, split) = if a[0] >= b[0] { (b, a) } else { (a, b) };
    let atom = split[0];
    let mut rest = split.to_vec();
    rest[0] = 0.0;
    let mut out = fft::linear_convolution(base, &rest, out_len);
    let size = fft::smooth_size(base.len().min(out_len) + rest.len().min(out_len));
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let floor = 8.0 * f64::EPSILON * (size as f64).log2() * norm(base) * norm(&rest);
    for v in &mut out {
        if *v < floor {
            *v = 0.0;
        }
    }
    for (o, &x) in out.iter_mut().zip(base) {
        *o += atom * x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bern(p: f64) -> Pmf {
        Pmf::canonicalize(vec![1.0 - p, p], 0.0).unwrap()
    }

    fn random_pmf(weights: Vec<f64>) -> Pmf {
        let total: f64 = weights.iter().sum();
        Pmf::canonicalize(weights.iter().map(|w| w / total).collect(), 0.0).unwrap()
    }

    fn pmf_strategy(max_len: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.01f64..1.0, 1..=max_len).prop_map(random_pmf)
    }

    #[test]
    fn dirac_shift() {
        let c = Pmf::dirac(1).convolve(&Pmf::dirac(2));
        assert_eq!(c, Pmf::dirac(3));
    }

    #[test]
    fn two_fair_coins() {
        let c = bern(0.5).convolve(&bern(0.5));
        assert_eq!(c.probs(), &[0.25, 0.5, 0.25]);
        assert_eq!(c.tail_mass(), 0.0);
    }

    #[test]
    fn convolution_tail_accounting() {
        let a = Pmf::from_parts(vec![0.5, 0.4], 0.1, 0.0).unwrap();
        let b = Pmf::from_parts(vec![0.8], 0.2, 0.0).unwrap();
        let c = a.convolve(&b);
        assert!((c.tail_mass() - (0.1 + 0.2 - 0.02)).abs() < 1e-15);
        assert!((c.probs().iter().sum::<f64>() + c.tail_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fft_path_matches_direct() {
        let a = random_pmf((0..300).map(|i| 1.0 / (1.0 + i as f64)).collect());
        let b = random_pmf((0..200).map(|i| (-(i as f64) / 40.0).exp()).collect());
        let direct = direct_convolution(a.probs(), b.probs(), 499);
        let fast = a.convolve(&b);
        assert!(fast.len() <= 499);
        for (j, d) in direct.iter().enumerate() {
            assert!((d - fast.mass(j)).abs() < 1e-14, "entry {j}");
        }
    }

    #[test]
    fn truncated_convolution_keeps_head() {
        let a = random_pmf(vec![1.0; 100]);
        let b = random_pmf(vec![1.0; 100]);
        let full = a.convolve(&b);
        let head = a.convolve_truncated(&b, 50);
        assert_eq!(head.len(), 50);
        for j in 0..50 {
            assert!((full.mass(j) - head.mass(j)).abs() < 1e-15);
        }
        let dropped: f64 = full.probs()[50..].iter().sum();
        assert!((head.tail_mass() - dropped).abs() < 1e-12);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(Pmf::dirac(0).tv_distance(&Pmf::dirac(1)).estimate, 1.0);
        let a = bern(0.3);
        assert_eq!(a.tv_distance(&a).estimate, 0.0);
        let d = bern(0.5).tv_distance(&Pmf::dirac(0));
        assert!((d.estimate - 0.5).abs() < 1e-15);
        assert_eq!(d.lower, d.upper);
    }

    #[test]
    fn tv_interval_covers_tails() {
        let a = Pmf::from_parts(vec![0.9, 0.1 - 1e-3], 1e-3, 0.0).unwrap();
        let b = Pmf::from_parts(vec![0.1, 0.9 - 2e-3], 2e-3, 0.0).unwrap();
        let d = a.tv_distance(&b);
        assert!((d.upper - d.lower - 3e-3).abs() < 1e-12);
        assert!(d.lower <= d.estimate && d.estimate <= d.upper);
    }

    #[test]
    fn gf_examples() {
        let p = 0.37;
        let z = Complex64::new(0.2, -0.5);
        let v = bern(p).gf_eval(z).unwrap().value;
        let expected = Complex64::new(1.0, 0.0) + p * (z - 1.0);
        assert!((v - expected).norm() < 1e-15);
        let i = Complex64::new(0.0, 1.0);
        let v = Pmf::dirac(2).gf_eval(i).unwrap().value;
        assert!((v + 1.0).norm() < 1e-15);
        let t = Pmf::from_parts(vec![0.6, 0.3], 0.1, 0.0).unwrap();
        let g = t.gf_eval(Complex64::new(1.0, 0.0)).unwrap();
        assert!((g.value.re - 0.9).abs() < 1e-15);
        assert_eq!(g.error_radius, 0.1);
        assert_eq!(bern(0.5).gf_eval(Complex64::new(1.0, 0.0)).unwrap().value.re, 1.0);
    }

    #[test]
    fn gf_rejects_outside_disk() {
        let err = bern(0.5).gf_eval(Complex64::new(1.0, 1e-3)).unwrap_err();
        assert!(matches!(err, PmfError::OutsideUnitDisk(_)));
        assert!(bern(0.5).gf_eval(Complex64::new(1.0 + 1e-13, 0.0)).is_ok());
    }

    #[test]
    fn factorial_moment_examples() {
        let b = bern(0.3);
        assert!((b.factorial_moment(1).unwrap().value - 0.3).abs() < 1e-15);
        assert_eq!(b.factorial_moment(2).unwrap().value, 0.0);
        assert_eq!(Pmf::dirac(3).factorial_moment(3).unwrap().value, 6.0);
        assert!(Pmf::dirac(3).factorial_moment(0).is_err());
        let t = Pmf::from_parts(vec![0.5, 0.4], 0.1, 0.0).unwrap();
        assert!(t.mean().lower_bound);
        assert!(!b.mean().lower_bound);
    }

    #[test]
    fn poisson_two_factorial_moment_by_series() {
        // m_j(Po(λ)) = λ^j; the oracle sums the series directly.
        let lambda = 2.0f64;
        let mut probs = Vec::new();
        let mut term = (-lambda).exp();
        let mut j = 0usize;
        while term > 1e-18 || j < 5 {
            probs.push(term);
            j += 1;
            term *= lambda / j as f64;
        }
        let total: f64 = probs.iter().sum();
        let pmf = Pmf::from_parts(probs, (1.0 - total).max(0.0), 0.0).unwrap();
        assert!(pmf.tail_mass() < 1e-14);
        let m2 = pmf.factorial_moment(2).unwrap();
        assert!((m2.value - 4.0).abs() < 1e-10);
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(Pmf::canonicalize(vec![1.0], 1e-15).unwrap(), Pmf::dirac(0));
        let p = Pmf::canonicalize(vec![0.5, 0.5, 1e-20], 1e-15).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
        assert_eq!(p.tail_mass(), 1e-20);
        assert!(matches!(
            Pmf::canonicalize(vec![0.3, 0.5], 1e-15),
            Err(PmfError::NotNormalized { .. })
        ));
        let clipped = Pmf::canonicalize(vec![0.5, -1e-16, 0.5], 0.0).unwrap();
        assert_eq!(clipped.mass(1), 0.0);
        assert!(matches!(
            Pmf::canonicalize(vec![0.6, -1e-3, 0.401], 0.0),
            Err(PmfError::NegativeEntry { index: 1, .. })
        ));
        let trailing = Pmf::canonicalize(vec![1.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(trailing.len(), 1);
    }

    #[test]
    fn deserialization_validates() {
        let ok: Pmf = serde_json::from_str(r#"{"probs":[0.25,0.75]}"#).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(serde_json::from_str::<Pmf>(r#"{"probs":[0.25,0.25]}"#).is_err());
    }

    proptest! {
        #[test]
        fn convolution_commutes_and_associates(a in pmf_strategy(12), b in pmf_strategy(12), c in pmf_strategy(12)) {
            let ab = a.convolve(&b);
            let ba = b.convolve(&a);
            let n = ab.len().max(ba.len());
            for j in 0..n {
                prop_assert!((ab.mass(j) - ba.mass(j)).abs() < 1e-12);
            }
            let left = ab.convolve(&c);
            let right = a.convolve(&b.convolve(&c));
            for j in 0..left.len().max(right.len()) {
                prop_assert!((left.mass(j) - right.mass(j)).abs() < 1e-12);
            }
        }

        #[test]
        fn identity_element(a in pmf_strategy(20)) {
            let c = a.convolve(&Pmf::dirac(0));
            prop_assert_eq!(c.len(), a.len());
            for j in 0..a.len() {
                prop_assert!((c.mass(j) - a.mass(j)).abs() < 1e-15);
            }
        }

        #[test]
        fn tv_is_a_metric(a in pmf_strategy(10), b in pmf_strategy(10), c in pmf_strategy(10)) {
            let ab = a.tv_distance(&b).estimate;
            prop_assert_eq!(ab, b.tv_distance(&a).estimate);
            let ac = a.tv_distance(&c).estimate;
            let cb = c.tv_distance(&b).estimate;
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn gf_is_multiplicative(a in pmf_strategy(15), b in pmf_strategy(15), r in 0.0f64..=1.0, theta in 0.0f64..6.3) {
            let z = Complex64::from_polar(r, theta);
            let lhs = a.convolve(&b).gf_eval(z).unwrap();
            let rhs = a.gf_eval(z).unwrap().value * b.gf_eval(z).unwrap().value;
            prop_assert!((lhs.value - rhs).norm() < 1e-10 + lhs.error_radius);
        }

        #[test]
        fn first_factorial_moment_is_mean(a in pmf_strategy(25)) {
            let mean: f64 = a.probs().iter().enumerate().map(|(l, p)| l as f64 * p).sum();
            prop_assert!((a.factorial_moment(1).unwrap().value - mean).abs() < 1e-12);
        }

        #[test]
        fn convolution_contracts_tv(a in pmf_strategy(10), b in pmf_strategy(10), c in pmf_strategy(10)) {
            let before = a.tv_distance(&b).estimate;
            let after = a.convolve(&c).tv_distance(&b.convolve(&c)).estimate;
            prop_assert!(after <= before + 1e-12);
        }

        #[test]
        fn unit_mass_invariant(a in pmf_strategy(80), b in pmf_strategy(80)) {
            let c = a.convolve(&b);
            let total: f64 = c.probs().iter().sum::<f64>() + c.tail_mass();
            prop_assert!((total - 1.0).abs() <= UNIT_MASS_SLACK);
            prop_assert!(c.probs().iter().all(|&p| p >= 0.0));
            prop_assert!(c.len() == 1 || *c.probs().last().unwrap() > 0.0);
        }
    }
}
