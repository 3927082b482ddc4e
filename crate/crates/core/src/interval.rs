//! Credible intervals: highest posterior density, equal-tailed and one-sided.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SufficientStats;
use crate::numerics::{find_root_with, student_t_quantile, Bracket, RootOptions};
use crate::posterior::{beta_posterior, ParamId, PosteriorDistribution, UnivariateDensity};

/// Required accuracy of the achieved mass.
pub const MASS_TOL: f64 = 1e-6;
/// Required relative accuracy of the endpoint density equality.
pub const DENSITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Hpd,
    /// HPD of a density whose mode sits on the lower support boundary: `[support_min, q(level)]`.
    HpdBoundary,
    EqualTailed,
    UpperOneSided,
    LowerOneSided,
}

impl IntervalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalKind::Hpd => "hpd",
            IntervalKind::HpdBoundary => "hpd_boundary",
            IntervalKind::EqualTailed => "equal_tailed",
            IntervalKind::UpperOneSided => "upper_one_sided",
            IntervalKind::LowerOneSided => "lower_one_sided",
        }
    }
}

impl fmt::Display for IntervalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hpd" => Ok(IntervalKind::Hpd),
            "equal_tailed" | "equal-tailed" => Ok(IntervalKind::EqualTailed),
            "upper_one_sided" | "upper" => Ok(IntervalKind::UpperOneSided),
            "lower_one_sided" | "lower" => Ok(IntervalKind::LowerOneSided),
            other => Err(Error::domain(format!("unknown interval kind `{other}`"))),
        }
    }
}

/// Which tail a one-sided interval leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `(support_min, q(level)]`.
    Upper,
    /// `[q(1 − level), support_max)`.
    Lower,
}

/// Infinite endpoints serialize to JSON `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CredibleInterval {
    pub param: ParamId,
    pub kind: IntervalKind,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    pub achieved_mass: f64,
}

impl CredibleInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {level}")))
    }
}

fn mass<D: UnivariateDensity + ?Sized>(d: &D, lo: f64, hi: f64) -> f64 {
    1.0 - d.cdf(lo) - d.sf(hi)
}

/// Symmetric t interval `b ± s·t_{n−2; α/2}` around `b = S₁₂/S₁₁`.
pub fn hpd_beta(stats: &SufficientStats, level: f64) -> Result<CredibleInterval> {
    check_level(level)?;
    let d = beta_posterior(stats)?;
    let df = stats.n as f64 - 2.0;
    let scale = (stats.s22_1 / (df * stats.s11)).sqrt();
    let half = scale * student_t_quantile(df, 0.5 + 0.5 * level)?;
    let (lo, hi) = (d.mode() - half, d.mode() + half);
    Ok(CredibleInterval {
        param: ParamId::Beta,
        kind: IntervalKind::Hpd,
        level,
        lo,
        hi,
        achieved_mass: mass(&d, lo, hi),
    })
}

/// Tail probabilities tried, in order, for the far end of the left-endpoint bracket.
#[derive(Debug, Clone)]
pub struct HpdOptions {
    pub tail_probs: Vec<f64>,
    pub max_iter: usize,
}

impl Default for HpdOptions {
    fn default() -> Self {
        HpdOptions {
            tail_probs: vec![1e-6, 1e-10, 1e-14],
            max_iter: 300,
        }
    }
}

impl HpdOptions {
    /// Deeper tails and more iterations, for a second attempt.
    pub fn widened() -> Self {
        HpdOptions {
            tail_probs: vec![1e-9, 1e-13, 1e-16, 1e-250],
            max_iter: 1000,
        }
    }
}

/// HPD interval of a unimodal posterior.
pub fn hpd_unimodal(dist: &PosteriorDistribution, level: f64) -> Result<CredibleInterval> {
    hpd_unimodal_with(dist, level, &HpdOptions::default())
}

pub fn hpd_unimodal_with(dist: &PosteriorDistribution, level: f64, opts: &HpdOptions) -> Result<CredibleInterval> {
    let (lo, hi, kind) = hpd_density(dist, level, opts)?;
    Ok(CredibleInterval {
        param: dist.param(),
        kind,
        level,
        lo,
        hi,
        achieved_mass: mass(dist, lo, hi),
    })
}

/// HPD endpoints of any unimodal density.
///
/// The left endpoint `lo` is the unknown. For each `lo` below the mode the
/// matching `hi` above the mode has the same density, and the enclosed mass
/// falls as `lo` rises toward the mode, so the outer problem is a monotone
/// scalar root.
pub fn hpd_density<D: UnivariateDensity + ?Sized>(
    d: &D,
    level: f64,
    opts: &HpdOptions,
) -> Result<(f64, f64, IntervalKind)> {
    check_level(level)?;
    let alpha = 1.0 - level;
    let mode = d.mode();
    let (smin, _) = d.support();
    if !(mode > smin) || !d.ln_pdf(mode).is_finite() {
        return Ok((smin, d.quantile(level)?, IntervalKind::HpdBoundary));
    }
    let ln_mode = d.ln_pdf(mode);

    let partner = |lo: f64| -> Result<f64> {
        if lo >= mode {
            return Ok(mode);
        }
        let target = d.ln_pdf(lo);
        let mut step = (mode - lo).max(f64::MIN_POSITIVE);
        let mut far = mode + step;
        while d.ln_pdf(far) > target {
            step *= 2.0;
            far = mode + step;
            if !far.is_finite() {
                return Err(Error::NoConvergence {
                    method: "hpd upper endpoint",
                    best: far,
                    error: f64::INFINITY,
                });
            }
        }
        if target == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        find_root_with(
            |x| d.ln_pdf(x) - target,
            Bracket::new(mode, far)?,
            RootOptions {
                x_tol: 4.0 * f64::EPSILON * far.abs(),
                f_tol: 0.0,
                max_iter: opts.max_iter,
            },
        )
    };
    let objective = |lo: f64| -> f64 {
        match partner(lo) {
            Ok(hi) => mass(d, lo, hi) - level,
            Err(_) => f64::NAN,
        }
    };

    let near = d.quantile(alpha)?.min(mode);
    let f_near = objective(near);
    if !(f_near <= 0.0) {
        return Err(Error::NotBracketed {
            lo: near,
            hi: near,
            f_lo: f_near,
            f_hi: f_near,
        });
    }
    let mut far_candidates: Vec<f64> = Vec::new();
    for &p in &opts.tail_probs {
        if p < alpha {
            if let Ok(x) = d.quantile(p) {
                far_candidates.push(x);
            }
        }
    }
    if smin.is_finite() {
        far_candidates.push(smin);
    }
    let mut bracket = None;
    for far in far_candidates {
        if far < near && objective(far) > 0.0 {
            bracket = Some(Bracket::new(far, near)?);
            break;
        }
    }
    let bracket = bracket.ok_or(Error::NotBracketed {
        lo: near,
        hi: near,
        f_lo: f_near,
        f_hi: f_near,
    })?;
    let scale = mode.abs().max(bracket.width());
    let lo = find_root_with(
        objective,
        bracket,
        RootOptions {
            x_tol: 1e-13 * scale,
            f_tol: 0.0,
            max_iter: opts.max_iter,
        },
    )?;
    let hi = partner(lo)?;

    let achieved = mass(d, lo, hi);
    let (pl, ph) = (d.ln_pdf(lo), d.ln_pdf(hi));
    let density_gap = (pl.exp() - ph.exp()).abs() / ln_mode.exp();
    if !((achieved - level).abs() <= MASS_TOL) || !(density_gap <= DENSITY_TOL) {
        return Err(Error::NoConvergence {
            method: "hpd",
            best: lo,
            error: (achieved - level).abs().max(density_gap),
        });
    }
    Ok((lo, hi, IntervalKind::Hpd))
}

/// `[q(α/2), q(1 − α/2)]`.
pub fn equal_tailed(dist: &PosteriorDistribution, level: f64) -> Result<CredibleInterval> {
    check_level(level)?;
    let alpha = 1.0 - level;
    let lo = dist.quantile(0.5 * alpha)?;
    let hi = dist.quantile(1.0 - 0.5 * alpha)?;
    Ok(CredibleInterval {
        param: dist.param(),
        kind: IntervalKind::EqualTailed,
        level,
        lo,
        hi,
        achieved_mass: mass(dist, lo, hi),
    })
}

pub fn one_sided(dist: &PosteriorDistribution, level: f64, side: Side) -> Result<CredibleInterval> {
    check_level(level)?;
    let (smin, smax) = dist.support();
    let (lo, hi, kind) = match side {
        Side::Upper => (smin, dist.quantile(level)?, IntervalKind::UpperOneSided),
        Side::Lower => (dist.quantile(1.0 - level)?, smax, IntervalKind::LowerOneSided),
    };
    Ok(CredibleInterval {
        param: dist.param(),
        kind,
        level,
        lo,
        hi,
        achieved_mass: mass(dist, lo, hi),
    })
}

/// Interval of the requested kind. `Hpd` on a β posterior uses the closed form.
pub fn interval(dist: &PosteriorDistribution, kind: IntervalKind, level: f64) -> Result<CredibleInterval> {
    match kind {
        IntervalKind::Hpd | IntervalKind::HpdBoundary => {
            if dist.param() == ParamId::Beta {
                hpd_beta(dist.stats(), level)
            } else {
                hpd_unimodal(dist, level)
            }
        }
        IntervalKind::EqualTailed => equal_tailed(dist, level),
        IntervalKind::UpperOneSided => one_sided(dist, level, Side::Upper),
        IntervalKind::LowerOneSided => one_sided(dist, level, Side::Lower),
    }
}
