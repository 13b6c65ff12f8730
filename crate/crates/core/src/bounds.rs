//! Numerical certificates for the closed-form total-variation bounds and the
//! inequalities they are assembled from.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inar::{self, ModelError, ModelSpec};
use crate::laws::{self, IntensityMeasure, LawError};
use crate::pmf::{Pmf, DISK_SLACK};

/// A check passes when `lhs ≤ rhs + PASS_SLACK`.
pub const PASS_SLACK: f64 = 1e-12;
/// Agreement required between a computed distance and its closed form.
pub const CLOSED_FORM_SLACK: f64 = 1e-10;
/// Truncation tolerance for infinite-support laws inside the checks.
const CHECK_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("p * E eps = {0} exceeds 1")]
    MeanTooLarge(f64),
    #[error("entry {index} has modulus {modulus} > 1")]
    OutsideUnitDisk { index: usize, modulus: f64 },
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub inputs: String,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, inputs: impl Into<String>) -> Self {
        let margin = rhs - lhs;
        BoundCheck {
            name: name.into(),
            lhs,
            rhs,
            margin,
            inputs: inputs.into(),
            pass: margin >= -PASS_SLACK,
        }
    }
}

/// `d(Be(p), Po(p)) = p (1 − e^{−p}) ≤ p²`.
///
/// The check also fails when the computed distance strays from the closed
/// form by more than `1e−10`.
pub fn be_po_bound(p: f64) -> Result<BoundCheck, BoundError> {
    let lhs = laws::bernoulli(p)?
        .tv_distance(&laws::poisson(p, CHECK_TOLERANCE)?)
        .estimate;
    let exact = p * (1.0 - (-p).exp());
    let mut check = BoundCheck::new("be_po", lhs, p * p, format!("p={p}; closed form {exact:.17e}"));
    check.pass &= (lhs - exact).abs() < CLOSED_FORM_SLACK;
    Ok(check)
}

/// `d(Bi(ε, p), Be(p E ε)) ≤ (3/2) p² E ε(ε−1)`, defined when `p E ε ≤ 1`.
pub fn bi_be_bound(eps: &Pmf, p: f64) -> Result<BoundCheck, BoundError> {
    let mean = eps.mean().value;
    if p * mean > 1.0 + PASS_SLACK {
        return Err(BoundError::MeanTooLarge(p * mean));
    }
    let mixture = laws::binomial_mixture(eps, p)?;
    let lhs = mixture.tv_distance(&laws::bernoulli((p * mean).min(1.0))?).estimate;
    let m2 = eps.factorial_moment(2).expect("order 2").value;
    Ok(BoundCheck::new("bi_be", lhs, 1.5 * p * p * m2, format!("p={p}; eps={:?}", eps.probs())))
}

/// `d(Bi(ε, p), CP(Bi(ε, p))) ≤ p² (E ε)²`, where the compound Poisson
/// intensity is the mixture restricted to the positive integers, together
/// with the intermediate `P(Bi(ε, p) ≥ 1) ≤ p E ε`.
pub fn bi_cp_bound(eps: &Pmf, p: f64) -> Result<[BoundCheck; 2], BoundError> {
    let mixture = laws::binomial_mixture(eps, p)?;
    let mean = eps.mean().value;
    let cp = laws::compound_poisson(&IntensityMeasure::from_positive_part(&mixture), CHECK_TOLERANCE)?;
    let lhs = mixture.tv_distance(&cp).estimate;
    let inputs = format!("p={p}; eps={:?}", eps.probs());
    let positive = 1.0 - mixture.mass(0);
    Ok([
        BoundCheck::new("bi_cp", lhs, (p * mean).powi(2), inputs.clone()),
        BoundCheck::new("bi_positive", positive, p * mean, inputs),
    ])
}

/// `|H(z) − Σ_{j<k} m_j/j! (z−1)^j| ≤ m_k/k! |z−1|^k` at every grid point.
pub fn taylor_remainder_bound(h: &Pmf, k: usize, z_grid: &[Complex64]) -> Vec<BoundCheck> {
    let moments: Vec<f64> = (0..=k)
        .map(|j| if j == 0 { 1.0 - h.tail_mass() } else { h.factorial_moment(j).expect("positive").value })
        .collect();
    let mut fact = vec![1.0f64; k + 1];
    for j in 1..=k {
        fact[j] = fact[j - 1] * j as f64;
    }
    z_grid
        .iter()
        .map(|&z| {
            let w = z - 1.0;
            let value = h.gf_eval_unchecked(z);
            let poly: Complex64 = (0..k).map(|j| moments[j] / fact[j] * w.powu(j as u32)).sum();
            let lhs = (value - poly).norm();
            let rhs = moments[k] / fact[k] * w.norm().powi(k as i32);
            BoundCheck::new("taylor", lhs, rhs, format!("k={k}; z={z}"))
        })
        .collect()
}

fn check_disk(points: &[Complex64]) -> Result<(), BoundError> {
    for (index, z) in points.iter().enumerate() {
        let modulus = z.norm();
        if modulus > 1.0 + DISK_SLACK {
            return Err(BoundError::OutsideUnitDisk { index, modulus });
        }
    }
    Ok(())
}

/// `|Π a_k − Π b_k| ≤ Σ |a_k − b_k|` for points of the closed unit disk.
pub fn product_difference_bound(a: &[Complex64], b: &[Complex64]) -> Result<BoundCheck, BoundError> {
    if a.len() != b.len() {
        return Err(BoundError::LengthMismatch(a.len(), b.len()));
    }
    check_disk(a)?;
    check_disk(b)?;
    let pa: Complex64 = a.iter().product();
    let pb: Complex64 = b.iter().product();
    let rhs = a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum();
    Ok(BoundCheck::new("product_difference", (pa - pb).norm(), rhs, format!("len={}", a.len())))
}

/// `d(∗ μ_k, ∗ ν_k) ≤ Σ d(μ_k, ν_k)`.
pub fn convolution_subadditivity(mus: &[Pmf], nus: &[Pmf]) -> Result<BoundCheck, BoundError> {
    if mus.len() != nus.len() {
        return Err(BoundError::LengthMismatch(mus.len(), nus.len()));
    }
    let fold = |xs: &[Pmf]| xs.iter().fold(Pmf::dirac(0), |acc, x| acc.convolve(x));
    let lhs = fold(mus).tv_distance(&fold(nus)).estimate;
    let rhs = mus.iter().zip(nus).map(|(m, n)| m.tv_distance(n).estimate).sum();
    Ok(BoundCheck::new("convolution_subadditivity", lhs, rhs, format!("pairs={}", mus.len())))
}

/// Upper bound on `d(L(X_n), Po(Σ_k m_{k,1} ρ_{[k,n]}))` obtained by applying
/// convolution subadditivity twice: `Σ_k (3/2) m_{k,2} ρ_{[k,n]}² + (m_{k,1} ρ_{[k,n]})²`.
///
/// Returns the bound and the Poisson parameter; `None` when some factorial
/// moment is infinite.
pub fn poisson_chain_bound(model: &ModelSpec, n: usize) -> Result<Option<(f64, f64)>, BoundError> {
    let products = model.rho_products(n)?;
    let mut bound = 0.0;
    let mut lambda = 0.0;
    for (k, &p) in (1..=n).zip(&products) {
        let law = model.immigration(k)?;
        let m1 = law.factorial_moment(1)?.value;
        let m2 = law.factorial_moment(2)?.value;
        if !m1.is_finite() || !m2.is_finite() {
            return Ok(None);
        }
        bound += 1.5 * m2 * p * p + (m1 * p).powi(2);
        lambda += m1 * p;
    }
    Ok(Some((bound, lambda)))
}

/// End-to-end version of [`poisson_chain_bound`]: the exact law against the
/// Poisson law with the matching mean.
pub fn poisson_chain_check(model: &ModelSpec, n: usize, tolerance: f64) -> Result<Option<BoundCheck>, BoundError> {
    let Some((bound, lambda)) = poisson_chain_bound(model, n)? else {
        return Ok(None);
    };
    let law = inar::exact_law(model, n, tolerance)?;
    let tv = law.tv_distance(&laws::poisson(lambda, tolerance)?);
    Ok(Some(BoundCheck::new("poisson_chain", tv.lower, bound, format!("model={}; n={n}", model.name))))
}

/// 49 points of the closed unit disk: radii `0, 1/6, …, 1` times seven angles.
pub fn disk_grid() -> Vec<Complex64> {
    let mut out = Vec::with_capacity(49);
    for r in 0..7 {
        for a in 0..7 {
            let theta = 2.0 * std::f64::consts::PI * a as f64 / 7.0 + 0.1;
            out.push(Complex64::from_polar(r as f64 / 6.0, theta));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    #[default]
    Coarse,
    Fine,
}

impl Grid {
    fn scale(self) -> usize {
        match self {
            Grid::Coarse => 1,
            Grid::Fine => 5,
        }
    }
}

/// Aggregated result of a bound sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub family: String,
    pub checks: usize,
    pub worst_margin: f64,
    pub violations: Vec<BoundCheck>,
}

impl SweepSummary {
    fn from_checks(family: &str, checks: Vec<BoundCheck>) -> Self {
        let worst_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        let count = checks.len();
        let violations = checks.into_iter().filter(|c| !c.pass).collect();
        SweepSummary { family: family.into(), checks: count, worst_margin, violations }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, max_len: usize) -> Pmf {
    let len = rng.random_range(1..=max_len);
    let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    Pmf::canonicalize(w.into_iter().map(|x| x / s).collect(), 0.0).expect("normalized")
}

fn random_disk_point(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Runs every bound family over its documented sweep; `Fine` multiplies the
/// sample sizes by five.
pub fn sweep(grid: Grid, seed: u64) -> Result<Vec<SweepSummary>, BoundError> {
    let scale = grid.scale();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let points = 100 * scale;
    let be_po = (0..=points)
        .map(|i| be_po_bound(i as f64 / points as f64))
        .collect::<Result<Vec<_>, _>>()?;
    out.push(SweepSummary::from_checks("be_po", be_po));

    let mut bi_be = Vec::new();
    let mut bi_cp = Vec::new();
    for _ in 0..500 * scale {
        let eps = random_pmf(&mut rng, 10);
        let mean = eps.mean().value;
        let cap = if mean > 0.0 { (1.0 / mean).min(0.3) } else { 0.3 };
        let p = rng.random_range(0.0..=cap);
        bi_be.push(bi_be_bound(&eps, p)?);
        bi_cp.extend(bi_cp_bound(&eps, p)?);
    }
    out.push(SweepSummary::from_checks("bi_be", bi_be));
    out.push(SweepSummary::from_checks("bi_cp", bi_cp));

    let z_grid = disk_grid();
    let mut taylor = Vec::new();
    let mut laws_to_check = vec![laws::bernoulli(0.3)?, laws::bernoulli(0.9)?];
    for lambda in [0.5, 1.0, 2.0] {
        laws_to_check.push(laws::poisson(lambda, CHECK_TOLERANCE)?);
    }
    for h in &laws_to_check {
        for k in 1..=3 {
            taylor.extend(taylor_remainder_bound(h, k, &z_grid));
        }
    }
    out.push(SweepSummary::from_checks("taylor", taylor));

    let mut products = Vec::new();
    let mut convolutions = Vec::new();
    for _ in 0..100 * scale {
        let len = rng.random_range(1..=10);
        let a: Vec<Complex64> = (0..len).map(|_| random_disk_point(&mut rng)).collect();
        let b: Vec<Complex64> = (0..len).map(|_| random_disk_point(&mut rng)).collect();
        products.push(product_difference_bound(&a, &b)?);
        let pairs = rng.random_range(1..=5);
        let mus: Vec<Pmf> = (0..pairs).map(|_| random_pmf(&mut rng, 8)).collect();
        let nus: Vec<Pmf> = (0..pairs).map(|_| random_pmf(&mut rng, 8)).collect();
        convolutions.push(convolution_subadditivity(&mus, &nus)?);
    }
    out.push(SweepSummary::from_checks("product_difference", products));
    out.push(SweepSummary::from_checks("convolution_subadditivity", convolutions));
    Ok(out)
}
