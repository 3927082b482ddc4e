//! The bivariate normal in its original `(μ₁, μ₂, σ₁, σ₂, ρ)` form and in the
//! orthogonal `(μ₁, μ₂, β, θ, η)` form, where
//!
//! * `β = ρσ₂/σ₁` is the regression slope of `X₂` on `X₁`,
//! * `θ = σ₁σ₂√(1−ρ²)` is the square root of the generalized variance,
//! * `η = σ₂√(1−ρ²)/σ₁` is the square root of `V(X₂|X₁)/V(X₁)`.
//!
//! In the orthogonal form the log-density is
//! `−ln(2πθ) − ½[(x₂−μ₂−β(x₁−μ₁))²/(θη) + η(x₁−μ₁)²/θ]`
//! and the Fisher information is block diagonal across `(μ₁, μ₂)`, `β`, `θ`, `η`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl OriginalParams {
    pub fn new(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        let p = OriginalParams {
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero means, unit standard deviations.
    pub fn standard(rho: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0, 1.0, rho)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(Error::domain("means must be finite"));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite() && self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::domain(format!(
                "standard deviations must be positive, got sigma1 = {}, sigma2 = {}",
                self.sigma1, self.sigma2
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::domain(format!("|rho| must be < 1, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn to_orthogonal(&self) -> OrthogonalParams {
        to_orthogonal(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalParams {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    pub theta: f64,
    pub eta: f64,
}

impl OrthogonalParams {
    pub fn new(mu1: f64, mu2: f64, beta: f64, theta: f64, eta: f64) -> Result<Self> {
        let p = OrthogonalParams {
            mu1,
            mu2,
            beta,
            theta,
            eta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1.is_finite() && self.mu2.is_finite() && self.beta.is_finite()) {
            return Err(Error::domain("means and beta must be finite"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite() && self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::domain(format!(
                "theta and eta must be positive, got theta = {}, eta = {}",
                self.theta, self.eta
            )));
        }
        Ok(())
    }

    pub fn to_original(&self) -> OriginalParams {
        to_original(self)
    }

    /// The interest parameters `(β, θ, η)` in that order.
    pub fn interest(&self) -> [f64; 3] {
        [self.beta, self.theta, self.eta]
    }

    fn with_interest(&self, v: [f64; 3]) -> Self {
        OrthogonalParams {
            beta: v[0],
            theta: v[1],
            eta: v[2],
            ..*self
        }
    }
}

pub fn to_orthogonal(p: &OriginalParams) -> OrthogonalParams {
    let c = (1.0 - p.rho * p.rho).sqrt();
    OrthogonalParams {
        mu1: p.mu1,
        mu2: p.mu2,
        beta: p.rho * p.sigma2 / p.sigma1,
        theta: p.sigma1 * p.sigma2 * c,
        eta: p.sigma2 * c / p.sigma1,
    }
}

/// Inverse map: `σ₁² = θ/η`, `σ₂² = θ(η² + β²)/η`, `ρ = βσ₁/σ₂`.
pub fn to_original(p: &OrthogonalParams) -> OriginalParams {
    let sigma1 = (p.theta / p.eta).sqrt();
    let sigma2 = (p.theta * (p.eta * p.eta + p.beta * p.beta) / p.eta).sqrt();
    OriginalParams {
        mu1: p.mu1,
        mu2: p.mu2,
        sigma1,
        sigma2,
        rho: p.beta * sigma1 / sigma2,
    }
}

/// Per-observation Fisher information in the orthogonal parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherInfo {
    /// Block for `(μ₁, μ₂)`.
    pub a_block: [[f64; 2]; 2],
    /// Diagonal entries for `(β, θ, η)`.
    pub diag_block: [f64; 3],
}

impl FisherInfo {
    /// Information for the interest parameter at `index` (0 = β, 1 = θ, 2 = η)
    /// and its reciprocal, the corresponding entry of the inverse.
    pub fn interest_entry(&self, index: usize) -> (f64, f64) {
        let v = self.diag_block[index];
        (v, 1.0 / v)
    }
}

pub fn fisher_information(p: &OrthogonalParams) -> FisherInfo {
    let te = p.theta * p.eta;
    FisherInfo {
        a_block: [
            [p.beta * p.beta / te + p.eta / p.theta, -p.beta / te],
            [-p.beta / te, 1.0 / te],
        ],
        diag_block: [
            1.0 / (p.eta * p.eta),
            1.0 / (p.theta * p.theta),
            1.0 / (p.eta * p.eta),
        ],
    }
}

pub fn log_density(p: &OrthogonalParams, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - p.mu1;
    let e = x2 - p.mu2 - p.beta * d1;
    -(2.0 * PI * p.theta).ln() - 0.5 * (e * e / (p.theta * p.eta) + p.eta * d1 * d1 / p.theta)
}

/// Closed-form score `(∂/∂β, ∂/∂θ, ∂/∂η) ln f`.
pub fn score(p: &OrthogonalParams, x1: f64, x2: f64) -> [f64; 3] {
    let d1 = x1 - p.mu1;
    let e = x2 - p.mu2 - p.beta * d1;
    let (t, h) = (p.theta, p.eta);
    [
        e * d1 / (t * h),
        -1.0 / t + (e * e / h + h * d1 * d1) / (2.0 * t * t),
        e * e / (2.0 * t * h * h) - d1 * d1 / (2.0 * t),
    ]
}

/// Orders of differentiation with respect to `(β, θ, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DerivOrder {
    pub beta: u8,
    pub theta: u8,
    pub eta: u8,
}

impl DerivOrder {
    pub const fn new(beta: u8, theta: u8, eta: u8) -> Self {
        DerivOrder { beta, theta, eta }
    }

    pub fn total(&self) -> u8 {
        self.beta + self.theta + self.eta
    }

    fn as_array(&self) -> [u8; 3] {
        [self.beta, self.theta, self.eta]
    }
}

/// Relative step used for finite differences of the score.
pub const SCORE_FD_STEP: f64 = 1e-4;

fn fd_step(v: f64) -> f64 {
    let h = SCORE_FD_STEP * v.abs().max(1.0);
    // θ and η must stay positive at the shifted points.
    if v > 0.0 && h >= 0.5 * v {
        SCORE_FD_STEP * v
    } else {
        h
    }
}

/// Partial derivative of `ln f` of total order 1 to 3 in `(β, θ, η)`.
///
/// First-order partials are exact. Higher orders take central differences of
/// the closed-form score with step `1e-4 · max(1, |parameter|)`, so carry
/// `O(h²)` truncation error. `ln f` is quadratic in `β`, so any partial with
/// three `β` derivatives is exactly zero.
pub fn log_density_partial(p: &OrthogonalParams, x1: f64, x2: f64, order: DerivOrder) -> Result<f64> {
    let total = order.total();
    if !(1..=3).contains(&total) {
        return Err(Error::domain(format!("unsupported derivative order {order:?}")));
    }
    if order.beta >= 3 {
        return Ok(0.0);
    }
    let mut rest = order.as_array();
    let axis = rest.iter().position(|&k| k > 0).expect("total >= 1");
    rest[axis] -= 1;
    let base = p.interest();
    let g = |v: [f64; 3]| score(&p.with_interest(v), x1, x2)[axis];
    let shifted = |moves: &[(usize, f64)]| {
        let mut v = base;
        for &(j, d) in moves {
            v[j] += d;
        }
        g(v)
    };

    let axes: Vec<usize> = (0..3).flat_map(|j| std::iter::repeat_n(j, rest[j] as usize)).collect();
    let value = match axes.as_slice() {
        [] => g(base),
        [j] => {
            let h = fd_step(base[*j]);
            (shifted(&[(*j, h)]) - shifted(&[(*j, -h)])) / (2.0 * h)
        }
        [j, k] if j == k => {
            let h = fd_step(base[*j]);
            (shifted(&[(*j, h)]) - 2.0 * g(base) + shifted(&[(*j, -h)])) / (h * h)
        }
        [j, k] => {
            let (hj, hk) = (fd_step(base[*j]), fd_step(base[*k]));
            (shifted(&[(*j, hj), (*k, hk)]) - shifted(&[(*j, hj), (*k, -hk)]) - shifted(&[(*j, -hj), (*k, hk)])
                + shifted(&[(*j, -hj), (*k, -hk)]))
                / (4.0 * hj * hk)
        }
        _ => unreachable!("total order is at most 3"),
    };
    Ok(value)
}

/// A sample of `(x₁, x₂)` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    x1: f64,
    x2: f64,
}

impl Dataset {
    pub fn new(pairs: Vec<(f64, f64)>) -> Self {
        Dataset { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Read CSV with header `x1,x2`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x1" || &headers[1] != "x2" {
            return Err(Error::domain(format!(
                "expected CSV header `x1,x2`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut pairs = Vec::new();
        for row in rdr.deserialize() {
            let Row { x1, x2 } = row?;
            if !(x1.is_finite() && x2.is_finite()) {
                return Err(Error::domain("non-finite value in dataset"));
            }
            pairs.push((x1, x2));
        }
        Ok(Dataset { pairs })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for &(x1, x2) in &self.pairs {
            wtr.serialize(Row { x1, x2 })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draw `n` pairs with `X₁ = μ₁ + σ₁Z₁`, `X₂ = μ₂ + σ₂(ρZ₁ + √(1−ρ²)Z₂)`.
/// The generator is ChaCha8 seeded from `seed`, so output depends only on the arguments.
pub fn sample(p: &OriginalParams, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    sample_into(p, n, &mut rng, &mut pairs);
    Dataset { pairs }
}

/// As [`sample`], appending to `out` from an existing generator.
pub fn sample_into<R: rand::Rng + ?Sized>(p: &OriginalParams, n: usize, rng: &mut R, out: &mut Vec<(f64, f64)>) {
    let c = (1.0 - p.rho * p.rho).sqrt();
    out.extend((0..n).map(|_| {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        (p.mu1 + p.sigma1 * z1, p.mu2 + p.sigma2 * (p.rho * z1 + c * z2))
    }));
}

/// Seed for an independent stream, mixed from a base seed and two indices (splitmix64).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ a) ^ b.rotate_left(32))
}

/// Sample size, means and centered sums of squares and cross-products
/// (sums, not averages).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub n: usize,
    pub xbar1: f64,
    pub xbar2: f64,
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
    /// Residual sum of squares of `X₂` after regression on `X₁`: `S₂₂ − S₁₂²/S₁₁`.
    pub s22_1: f64,
}

impl SufficientStats {
    /// Build from summary values; `s22_1` is derived.
    pub fn new(n: usize, xbar1: f64, xbar2: f64, s11: f64, s12: f64, s22: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::degenerate(format!("need at least 3 observations, got {n}")));
        }
        if !(s11 > 0.0 && s11.is_finite()) {
            return Err(Error::degenerate(format!("S11 must be positive, got {s11}")));
        }
        if !(s22.is_finite() && s12.is_finite() && xbar1.is_finite() && xbar2.is_finite()) {
            return Err(Error::degenerate("non-finite summary statistic"));
        }
        let s22_1 = s22 - s12 * s12 / s11;
        // Anything below rounding level of S22 is exact collinearity.
        if !(s22_1 > 64.0 * f64::EPSILON * s22) {
            return Err(Error::degenerate(format!("S22.1 = {s22_1} (collinear data)")));
        }
        Ok(SufficientStats {
            n,
            xbar1,
            xbar2,
            s11,
            s22,
            s12,
            s22_1,
        })
    }

    /// Least-squares slope `S₁₂/S₁₁`.
    pub fn slope(&self) -> f64 {
        self.s12 / self.s11
    }

    /// `√(S₁₁ S₂₂.₁)`.
    pub fn root_product(&self) -> f64 {
        (self.s11 * self.s22_1).sqrt()
    }
}

pub fn sufficient_stats(data: &[(f64, f64)]) -> Result<SufficientStats> {
    let n = data.len();
    if n < 3 {
        return Err(Error::degenerate(format!("need at least 3 observations, got {n}")));
    }
    let nf = n as f64;
    let (sum1, sum2) = data.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (m1, m2) = (sum1 / nf, sum2 / nf);
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    for &(x, y) in data {
        let (d1, d2) = (x - m1, y - m2);
        s11 += d1 * d1;
        s22 += d2 * d2;
        s12 += d1 * d2;
    }
    SufficientStats::new(n, m1, m2, s11, s12, s22)
}
