//! Marginal posteriors of `β`, `θ`, `w = 1/θ` and `η` under the prior
//! `π(μ₁, μ₂, β, θ, η) ∝ (θη)⁻¹`.
//!
//! With `b = S₁₂/S₁₁`, `r = √(S₁₁S₂₂.₁)` and `a = S₂₂.₁/S₁₁`:
//!
//! * `β`: Student-t, `n − 2` degrees of freedom, location `b`, scale
//!   `√(S₂₂.₁ / ((n − 2) S₁₁))`. Integrating `θ` and `η` out of the joint
//!   posterior gives the kernel `(1 + (β − b)² S₁₁/S₂₂.₁)^{−(n−1)/2}`; the
//!   `S₁₁` inside the quadratic form is what makes the scale carry `1/√S₁₁`.
//! * `θ`: density `∝ θ^{−(n−1)} e^{−r/θ}`, i.e. `w = 1/θ ~ Gamma(n − 2, rate r)`.
//!   Both are normalized exactly through `ln Γ(n − 2)`.
//! * `η`: density `∝ η^{n−2} (η² + a)^{−(n−3/2)}`, normalized by quadrature.
//!   Under `z = η²/(η² + a)` it is a `Beta((n−1)/2, (n−2)/2)` kernel; that
//!   closed-form CDF is only used once it agrees with the quadrature CDF.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SufficientStats;
use crate::numerics::{
    beta_quantile, find_root_with, gamma_quantile, integrate_with, log_beta, log_gamma, reg_inc_beta, reg_inc_gamma,
    reg_inc_gamma_upper, student_t_cdf, student_t_quantile, student_t_sf, Bracket, QuadOptions, RootOptions,
};

/// Agreement required between the closed-form and quadrature CDFs of `η`.
pub const ETA_CDF_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    Beta,
    Theta,
    /// `w = 1/θ`.
    PrecisionW,
    Eta,
}

impl ParamId {
    pub const ALL: [ParamId; 4] = [ParamId::Beta, ParamId::Theta, ParamId::PrecisionW, ParamId::Eta];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamId::Beta => "beta",
            ParamId::Theta => "theta",
            ParamId::PrecisionW => "w",
            ParamId::Eta => "eta",
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(ParamId::Beta),
            "theta" => Ok(ParamId::Theta),
            "w" | "precision_w" => Ok(ParamId::PrecisionW),
            "eta" => Ok(ParamId::Eta),
            other => Err(Error::domain(format!("unknown parameter `{other}`"))),
        }
    }
}

/// A continuous univariate density with the operations the interval solvers need.
pub trait UnivariateDensity {
    fn ln_pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    /// `1 − cdf(x)`, computed without cancellation where possible.
    fn sf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> Result<f64>;
    fn mode(&self) -> f64;
    /// Closed support `(lo, hi)`; infinite ends are allowed.
    fn support(&self) -> (f64, f64);

    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    StudentT { loc: f64, scale: f64, df: f64 },
    /// Density `∝ x^{−(shape+1)} e^{−rate/x}`.
    InverseGamma { shape: f64, rate: f64 },
    /// Density `∝ x^{shape−1} e^{−rate·x}`.
    Gamma { shape: f64, rate: f64 },
    /// Density `∝ x^{n−2} (x² + a)^{−(n−3/2)}`, stored in units of `√a`.
    Eta(EtaKernel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EtaKernel {
    n: f64,
    /// `S₂₂.₁ / S₁₁`.
    a: f64,
    /// `∫₀^∞ k(t) dt` for the scale-free kernel `k` below.
    mass: f64,
    closed_form: bool,
}

impl EtaKernel {
    fn t_mode(n: f64) -> f64 {
        ((n - 2.0) / (n - 1.0)).sqrt()
    }

    fn ln_raw(n: f64, t: f64) -> f64 {
        (n - 2.0) * t.ln() - (n - 1.5) * t.mul_add(t, 1.0).ln()
    }

    /// Unshifted log kernel at the mode.
    fn ln_peak(n: f64) -> f64 {
        Self::ln_raw(n, Self::t_mode(n))
    }

    /// `ln` of `t^{n−2}(1 + t²)^{−(n−3/2)}`, shifted to be 0 at the mode.
    fn ln_k(n: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return if n > 2.0 { f64::NEG_INFINITY } else { 0.0 };
        }
        Self::ln_raw(n, t) - Self::ln_peak(n)
    }

    fn quad(n: f64, lo: f64, hi: f64, abs_tol: f64) -> Result<f64> {
        let r = integrate_with(
            |t| Self::ln_k(n, t).exp(),
            lo,
            hi,
            QuadOptions {
                abs_tol,
                rel_tol: 1e-13,
                max_segments: 4000,
            },
        )?;
        Ok(r.value)
    }

    fn cdf_quadrature(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x.is_infinite() {
            return Ok(1.0);
        }
        let t = x / self.a.sqrt();
        let tol = 1e-13 * self.mass;
        if t <= Self::t_mode(self.n) {
            Ok((Self::quad(self.n, 0.0, t, tol)? / self.mass).clamp(0.0, 1.0))
        } else {
            Ok((1.0 - Self::quad(self.n, t, f64::INFINITY, tol)? / self.mass).clamp(0.0, 1.0))
        }
    }

    fn shapes(&self) -> (f64, f64) {
        (0.5 * (self.n - 1.0), 0.5 * (self.n - 2.0))
    }

    fn cdf_closed_form(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        let t2 = x * x / self.a;
        let (p, q) = self.shapes();
        if t2 <= 1.0 {
            reg_inc_beta(p, q, t2 / (t2 + 1.0)).unwrap_or(f64::NAN)
        } else {
            1.0 - reg_inc_beta(q, p, 1.0 / (t2 + 1.0)).unwrap_or(f64::NAN)
        }
    }

    fn sf_closed_form(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x.is_infinite() {
            return 0.0;
        }
        let t2 = x * x / self.a;
        let (p, q) = self.shapes();
        reg_inc_beta(q, p, 1.0 / (t2 + 1.0)).unwrap_or(f64::NAN)
    }
}

/// A marginal posterior. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorDistribution {
    param: ParamId,
    stats: SufficientStats,
    log_norm: f64,
    family: Family,
}

fn check_stats(stats: &SufficientStats) -> Result<()> {
    if stats.n < 3 || !(stats.s11 > 0.0) || !(stats.s22_1 > 0.0) {
        return Err(Error::degenerate(format!(
            "posterior needs n >= 3, S11 > 0 and S22.1 > 0 (n = {}, S11 = {}, S22.1 = {})",
            stats.n, stats.s11, stats.s22_1
        )));
    }
    Ok(())
}

/// Student-t posterior of the regression slope.
pub fn beta_posterior(stats: &SufficientStats) -> Result<PosteriorDistribution> {
    check_stats(stats)?;
    let df = stats.n as f64 - 2.0;
    let scale = (stats.s22_1 / (df * stats.s11)).sqrt();
    let log_norm = log_gamma(0.5 * (df + 1.0))? - log_gamma(0.5 * df)?
        - 0.5 * (df * std::f64::consts::PI).ln()
        - scale.ln();
    Ok(PosteriorDistribution {
        param: ParamId::Beta,
        stats: *stats,
        log_norm,
        family: Family::StudentT {
            loc: stats.slope(),
            scale,
            df,
        },
    })
}

/// Posterior of `θ`, the square root of the generalized variance.
pub fn theta_posterior(stats: &SufficientStats) -> Result<PosteriorDistribution> {
    check_stats(stats)?;
    let shape = stats.n as f64 - 2.0;
    let rate = stats.root_product();
    Ok(PosteriorDistribution {
        param: ParamId::Theta,
        stats: *stats,
        log_norm: shape * rate.ln() - log_gamma(shape)?,
        family: Family::InverseGamma { shape, rate },
    })
}

/// Posterior of the precision-like `w = 1/θ`: `Gamma(n − 2, rate √(S₁₁S₂₂.₁))`.
pub fn precision_posterior(stats: &SufficientStats) -> Result<PosteriorDistribution> {
    check_stats(stats)?;
    let shape = stats.n as f64 - 2.0;
    let rate = stats.root_product();
    Ok(PosteriorDistribution {
        param: ParamId::PrecisionW,
        stats: *stats,
        log_norm: shape * rate.ln() - log_gamma(shape)?,
        family: Family::Gamma { shape, rate },
    })
}

/// Posterior of `η`. Normalized by quadrature; the incomplete-beta CDF is
/// switched on only if it matches the quadrature CDF to [`ETA_CDF_AGREEMENT`]
/// at a spread of points around the mode.
pub fn eta_posterior(stats: &SufficientStats) -> Result<PosteriorDistribution> {
    check_stats(stats)?;
    let n = stats.n as f64;
    let a = stats.s22_1 / stats.s11;
    let (mass, closed_form) = eta_scale_free(stats.n)?;
    let kernel = EtaKernel {
        n,
        a,
        mass,
        closed_form,
    };
    // ∫ η^{n−2}(η² + a)^{−(n−3/2)} dη = a^{(2−n)/2} · mass · exp(ln k̃(mode)).
    let t_mode = EtaKernel::t_mode(n);
    let ln_peak = (n - 2.0) * t_mode.ln() - (n - 1.5) * (1.0 + t_mode * t_mode).ln();
    let log_norm = -(0.5 * (2.0 - n) * a.ln() + mass.ln() + ln_peak);
    Ok(PosteriorDistribution {
        param: ParamId::Eta,
        stats: *stats,
        log_norm,
        family: Family::Eta(kernel),
    })
}

/// Mass of the scale-free `η` kernel and whether the closed-form CDF agrees
/// with quadrature. Both depend on `n` alone, so they are computed once per `n`.
fn eta_scale_free(n_obs: usize) -> Result<(f64, bool)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (f64, bool)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&hit) = cache.lock().expect("eta cache poisoned").get(&n_obs) {
        return Ok(hit);
    }
    let n = n_obs as f64;
    let mass = EtaKernel::quad(n, 0.0, f64::INFINITY, 1e-13)?;
    let kernel = EtaKernel {
        n,
        a: 1.0,
        mass,
        closed_form: false,
    };
    let mode = EtaKernel::t_mode(n);
    let mut agree = true;
    for m in [0.25, 0.6, 1.0, 1.7, 4.0] {
        let x = m * mode;
        let gap = (kernel.cdf_closed_form(x) - kernel.cdf_quadrature(x)?).abs();
        if !(gap <= ETA_CDF_AGREEMENT) {
            agree = false;
            break;
        }
    }
    cache.lock().expect("eta cache poisoned").insert(n_obs, (mass, agree));
    Ok((mass, agree))
}

/// Posterior for any parameter.
pub fn posterior(param: ParamId, stats: &SufficientStats) -> Result<PosteriorDistribution> {
    match param {
        ParamId::Beta => beta_posterior(stats),
        ParamId::Theta => theta_posterior(stats),
        ParamId::PrecisionW => precision_posterior(stats),
        ParamId::Eta => eta_posterior(stats),
    }
}

impl PosteriorDistribution {
    pub fn param(&self) -> ParamId {
        self.param
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    /// Log of the normalizing constant multiplying the kernel.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Unnormalized log density.
    pub fn ln_kernel(&self, x: f64) -> f64 {
        match self.family {
            Family::StudentT { loc, scale, df } => {
                let z = (x - loc) / scale;
                -0.5 * (df + 1.0) * (z * z / df).ln_1p()
            }
            Family::InverseGamma { shape, rate } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -(shape + 1.0) * x.ln() - rate / x
                }
            }
            Family::Gamma { shape, rate } => {
                if x < 0.0 || (x == 0.0 && shape > 1.0) {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    if shape == 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (shape - 1.0) * x.ln() - rate * x
                }
            }
            Family::Eta(k) => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (k.n - 2.0) * x.ln() - (k.n - 1.5) * (x * x + k.a).ln()
                }
            }
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self.family {
            Family::StudentT { loc, df, .. } => (df > 1.0).then_some(loc),
            Family::InverseGamma { shape, rate } => (shape > 1.0).then(|| rate / (shape - 1.0)),
            Family::Gamma { shape, rate } => Some(shape / rate),
            // E[η] = √a·∫ t·k(t) dt / ∫ k(t) dt, finite for n > 3; the
            // numerator is ½B(n/2, (n−3)/2).
            Family::Eta(k) => {
                if k.n <= 3.0 {
                    return None;
                }
                let ln_first =
                    log_beta(k.n / 2.0, (k.n - 3.0) / 2.0).ok()? - std::f64::consts::LN_2 - EtaKernel::ln_peak(k.n);
                Some(k.a.sqrt() * ln_first.exp() / k.mass)
            }
        }
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    /// Whether the `η` CDF runs on the incomplete-beta identity (always false for other parameters).
    pub fn uses_closed_form_cdf(&self) -> bool {
        matches!(self.family, Family::Eta(k) if k.closed_form)
    }

    /// `η` CDF by direct quadrature of the normalized density.
    pub fn eta_cdf_quadrature(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::Eta(k) => k.cdf_quadrature(x),
            _ => Err(Error::domain("quadrature CDF is only defined for the eta posterior")),
        }
    }

    /// `η` CDF through `I_z((n−1)/2, (n−2)/2)` with `z = x²S₁₁/(x²S₁₁ + S₂₂.₁)`.
    pub fn eta_cdf_closed_form(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::Eta(k) => Ok(k.cdf_closed_form(x)),
            _ => Err(Error::domain("closed-form CDF identity is only defined for the eta posterior")),
        }
    }

    fn quantile_by_search(&self, p: f64) -> Result<f64> {
        let (lo, _) = self.support();
        let mut hi = self.mode().max(1e-300) * 2.0 + 1.0;
        while self.cdf(hi) < p {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::domain(format!("quantile search overflow at p = {p}")));
            }
        }
        find_root_with(
            |x| self.cdf(x) - p,
            Bracket::new(lo.max(0.0), hi)?,
            RootOptions {
                x_tol: 0.0,
                f_tol: 0.0,
                max_iter: 500,
            },
        )
    }
}

impl UnivariateDensity for PosteriorDistribution {
    fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_kernel(x) + self.log_norm
    }

    fn cdf(&self, x: f64) -> f64 {
        match self.family {
            Family::StudentT { loc, scale, df } => student_t_cdf(df, (x - loc) / scale).unwrap_or(f64::NAN),
            Family::InverseGamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    reg_inc_gamma_upper(shape, rate / x).unwrap_or(f64::NAN)
                }
            }
            Family::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    reg_inc_gamma(shape, rate * x).unwrap_or(f64::NAN)
                }
            }
            Family::Eta(k) => {
                if k.closed_form {
                    k.cdf_closed_form(x)
                } else {
                    k.cdf_quadrature(x).unwrap_or(f64::NAN)
                }
            }
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match self.family {
            Family::StudentT { loc, scale, df } => student_t_sf(df, (x - loc) / scale).unwrap_or(f64::NAN),
            Family::InverseGamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    reg_inc_gamma(shape, rate / x).unwrap_or(f64::NAN)
                }
            }
            Family::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    reg_inc_gamma_upper(shape, rate * x).unwrap_or(f64::NAN)
                }
            }
            Family::Eta(k) => {
                if k.closed_form {
                    k.sf_closed_form(x)
                } else {
                    1.0 - k.cdf_quadrature(x).unwrap_or(f64::NAN)
                }
            }
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        match self.family {
            Family::StudentT { loc, scale, df } => Ok(loc + scale * student_t_quantile(df, p)?),
            Family::InverseGamma { shape, rate } => Ok(rate / gamma_quantile(shape, 1.0 - p)?),
            Family::Gamma { shape, rate } => Ok(gamma_quantile(shape, p)? / rate),
            Family::Eta(k) if k.closed_form => {
                let (a, b) = k.shapes();
                let t2 = if p <= 0.5 {
                    let z = beta_quantile(a, b, p)?;
                    z / (1.0 - z)
                } else {
                    let w = beta_quantile(b, a, 1.0 - p)?;
                    (1.0 - w) / w
                };
                Ok(k.a.sqrt() * t2.sqrt())
            }
            Family::Eta(_) => self.quantile_by_search(p),
        }
    }

    fn mode(&self) -> f64 {
        match self.family {
            Family::StudentT { loc, .. } => loc,
            Family::InverseGamma { shape, rate } => rate / (shape + 1.0),
            Family::Gamma { shape, rate } => ((shape - 1.0) / rate).max(0.0),
            Family::Eta(k) => k.a.sqrt() * EtaKernel::t_mode(k.n),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self.family {
            Family::StudentT { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    fn stats(n: usize, s11: f64, s12: f64, s22: f64) -> SufficientStats {
        SufficientStats::new(n, 0.0, 0.0, s11, s12, s22).unwrap()
    }

    fn all(s: &SufficientStats) -> Vec<PosteriorDistribution> {
        ParamId::ALL.iter().map(|&p| posterior(p, s).unwrap()).collect()
    }

    #[test]
    fn beta_mode_hand_example() {
        let s = crate::model::sufficient_stats(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        let d = beta_posterior(&s).unwrap();
        assert_eq!(d.mode(), 0.0);
    }

    #[test]
    fn beta_symmetry() {
        let d = beta_posterior(&stats(9, 4.0, 1.3, 3.0)).unwrap();
        let m = d.mode();
        for dx in [0.01, 0.3, 1.7, 5.0] {
            assert!((d.pdf(m + dx) - d.pdf(m - dx)).abs() <= 1e-15 * d.pdf(m));
        }
    }

    #[test]
    fn theta_and_w_facts() {
        let s = stats(10, 9.0, 0.0, 4.0);
        let w = precision_posterior(&s).unwrap();
        assert!((w.mean().unwrap() - 8.0 / 6.0).abs() < 1e-15);
        let t = theta_posterior(&s).unwrap();
        assert!((t.mode() - 6.0 / 9.0).abs() < 1e-15);
        // Derivative of the log density vanishes at the mode.
        let h = 1e-5;
        let slope = (t.ln_pdf(t.mode() + h) - t.ln_pdf(t.mode() - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-6);
    }

    #[test]
    fn theta_w_change_of_variables() {
        let s = stats(7, 2.5, -0.4, 1.9);
        let (t, w) = (theta_posterior(&s).unwrap(), precision_posterior(&s).unwrap());
        for x in [0.05, 0.3, 0.8, 1.0, 2.2, 9.0] {
            assert!((t.cdf(x) + w.cdf(1.0 / x) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eta_limits_and_identity() {
        let s = stats(10, 3.0, 1.0, 2.5);
        let e = eta_posterior(&s).unwrap();
        assert!(e.uses_closed_form_cdf());
        assert_eq!(e.cdf(0.0), 0.0);
        assert!(1.0 - e.cdf(1e8) < 1e-12);
        for x in [0.01, 0.2, 0.5, 0.9, 1.4, 3.0, 20.0] {
            let gap = (e.eta_cdf_closed_form(x).unwrap() - e.eta_cdf_quadrature(x).unwrap()).abs();
            assert!(gap <= 1e-8, "x = {x}, gap = {gap}");
        }
    }

    #[test]
    fn eta_median_matches_beta_median() {
        let s = stats(10, 3.0, -1.1, 2.5);
        let e = eta_posterior(&s).unwrap();
        let med = e.median().unwrap();
        let zmed = beta_quantile(4.5, 4.0, 0.5).unwrap();
        let expected = zmed / (1.0 - zmed);
        assert!((med * med * s.s11 / s.s22_1 - expected).abs() < 1e-8);
    }

    #[test]
    fn eta_small_n() {
        let s = stats(3, 1.5, 0.2, 0.9);
        let e = eta_posterior(&s).unwrap();
        let total = integrate(|x| e.pdf(x), 0.0, f64::INFINITY, 1e-11).unwrap().value;
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn every_family_integrates_to_one() {
        for s in [stats(4, 1.0, 0.3, 2.0), stats(12, 9.0, 2.0, 4.0), stats(20, 31.0, -12.0, 17.0)] {
            for d in all(&s) {
                let (lo, hi) = d.support();
                let total = integrate(|x| d.pdf(x), lo, hi, 1e-11).unwrap().value;
                assert!((total - 1.0).abs() < 1e-8, "{:?} n = {}: {}", d.param(), s.n, total);
            }
        }
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        let s = stats(8, 2.0, 0.7, 1.6);
        for d in all(&s) {
            let (lo, _) = d.support();
            for p in [0.1, 0.5, 0.9] {
                let x = d.quantile(p).unwrap();
                let mass = integrate(|u| d.pdf(u), lo, x, 1e-12).unwrap().value;
                assert!((mass - p).abs() < 1e-9, "{:?} p = {p}", d.param());
                assert!((d.cdf(x) + d.sf(x) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eta_mean_matches_beta_moment() {
        // t² = z/(1−z) with z ~ Beta(p, q): E[t] = B(p + ½, q − ½)/B(p, q).
        let lb = |a: f64, b: f64| log_gamma(a).unwrap() + log_gamma(b).unwrap() - log_gamma(a + b).unwrap();
        for n in 4..=60 {
            let s = stats(n, 5.0, 1.0, 3.0);
            let e = eta_posterior(&s).unwrap();
            let (p, q) = ((n as f64 - 1.0) / 2.0, (n as f64 - 2.0) / 2.0);
            let et = (lb(p + 0.5, q - 0.5) - lb(p, q)).exp();
            let a = s.s22_1 / s.s11;
            let m = e.mean().unwrap_or_else(|| panic!("no mean at n = {n}"));
            assert!((m - a.sqrt() * et).abs() < 1e-10 * m, "n = {n}: {m} vs {}", a.sqrt() * et);
        }
        assert!(eta_posterior(&stats(3, 5.0, 1.0, 3.0)).unwrap().mean().is_none());
    }

    #[test]
    fn w_posterior_mean_by_quadrature() {
        let s = stats(9, 5.0, 1.0, 3.0);
        let w = precision_posterior(&s).unwrap();
        let m = integrate(|x| x * w.pdf(x), 0.0, f64::INFINITY, 1e-12).unwrap().value;
        assert!((m - 7.0 / s.root_product()).abs() < 1e-10);
    }

    #[test]
    fn log_concave_after_log_transform() {
        let s = stats(6, 2.0, 0.5, 1.5);
        let h = 1e-3;
        // θ and η in log coordinates: density of u = ln x is pdf(e^u) e^u.
        for d in [theta_posterior(&s).unwrap(), eta_posterior(&s).unwrap()] {
            let g = |u: f64| d.ln_pdf(u.exp()) + u;
            for i in -40..40 {
                let u = i as f64 * 0.1;
                assert!(g(u + h) - 2.0 * g(u) + g(u - h) <= 1e-12, "{:?} at u = {u}", d.param());
            }
        }
        let w = precision_posterior(&s).unwrap();
        for i in 1..200 {
            let x = i as f64 * 0.05;
            assert!(w.ln_pdf(x + h) - 2.0 * w.ln_pdf(x) + w.ln_pdf(x - h) <= 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_stats() {
        let mut s = stats(5, 1.0, 0.0, 1.0);
        s.s22_1 = 0.0;
        assert!(matches!(beta_posterior(&s), Err(Error::Degenerate(_))));
        assert!(eta_posterior(&s).is_err());
    }

    #[test]
    fn param_names() {
        for p in ParamId::ALL {
            assert_eq!(p.as_str().parse::<ParamId>().unwrap(), p);
        }
        assert!("rho".parse::<ParamId>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn quantile_inverts_cdf(n in 4usize..30, s11 in 0.2f64..30.0, r in -0.9f64..0.9, s22 in 0.2f64..30.0, p in 0.001f64..0.999) {
            let s = stats(n, s11, r * (s11 * s22).sqrt(), s22);
            for d in all(&s) {
                let x = d.quantile(p).unwrap();
                proptest::prop_assert!((d.cdf(x) - p).abs() <= 1e-12, "{:?}", d.param());
                let back = d.quantile(d.cdf(x)).unwrap();
                proptest::prop_assert!((back - x).abs() <= 1e-8 * x.abs().max(1.0), "{:?}: {} vs {}", d.param(), back, x);
            }
        }
    }
}
