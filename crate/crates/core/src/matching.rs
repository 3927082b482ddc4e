//! Numerical checks of the prior's defining properties: the third-order
//! expectation identities of the orthogonal model, by Monte Carlo, and the
//! reduced matching differential equations, as residuals on a grid.
//!
//! Every condition is linear in `π`, so each residual is written out in terms
//! of the prior jet `(π, π_β, π_θ, π_η, π_ββ, π_θθ, π_ηη)` after expanding the
//! products in the stated left-hand side.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive_seed, log_density_partial, sample_into, DerivOrder, OrthogonalParams};

/// Pass threshold on the max residual when the prior supplies analytic partials.
pub const ANALYTIC_THRESHOLD: f64 = 1e-5;
/// Pass threshold when partials come from finite differences.
pub const FD_THRESHOLD: f64 = 1e-3;
/// Relative finite-difference step: `h = FD_STEP·θ` and `FD_STEP·η` on the
/// positive axes, `FD_STEP·max(1, |β|)` on the unbounded one.
pub const FD_STEP: f64 = 1e-4;
/// Smallest Monte Carlo sample accepted by [`verify_lemma21`].
pub const MIN_LEMMA_SAMPLES: usize = 100_000;

/// `π` and the partials the conditions use. Mixed partials never appear.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PriorJet {
    pub pi: f64,
    pub d_beta: f64,
    pub d_theta: f64,
    pub d_eta: f64,
    pub d_beta2: f64,
    pub d_theta2: f64,
    pub d_eta2: f64,
}

impl PriorJet {
    fn scaled(self, c: f64) -> Self {
        PriorJet {
            pi: c * self.pi,
            d_beta: c * self.d_beta,
            d_theta: c * self.d_theta,
            d_eta: c * self.d_eta,
            d_beta2: c * self.d_beta2,
            d_theta2: c * self.d_theta2,
            d_eta2: c * self.d_eta2,
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.pi,
            self.d_beta,
            self.d_theta,
            self.d_eta,
            self.d_beta2,
            self.d_theta2,
            self.d_eta2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

type LogPriorFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type JetFn = Arc<dyn Fn(f64, f64, f64) -> PriorJet + Send + Sync>;

/// A candidate prior `π(β, θ, η)`, given through `ln π` and optionally its exact jet.
#[derive(Clone)]
pub struct PriorSpec {
    name: String,
    log_prior: LogPriorFn,
    analytic: Option<JetFn>,
}

impl fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorSpec")
            .field("name", &self.name)
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl PriorSpec {
    pub fn custom(name: impl Into<String>, log_prior: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        PriorSpec {
            name: name.into(),
            log_prior: Arc::new(log_prior),
            analytic: None,
        }
    }

    pub fn with_analytic(mut self, jet: impl Fn(f64, f64, f64) -> PriorJet + Send + Sync + 'static) -> Self {
        self.analytic = Some(Arc::new(jet));
        self
    }

    /// `π ∝ (θη)⁻¹` with exact partials.
    pub fn matching() -> Self {
        Self::matching_fd().renamed("matching").with_analytic(|_, t, e| {
            let pi = 1.0 / (t * e);
            PriorJet {
                pi,
                d_beta: 0.0,
                d_theta: -pi / t,
                d_eta: -pi / e,
                d_beta2: 0.0,
                d_theta2: 2.0 * pi / (t * t),
                d_eta2: 2.0 * pi / (e * e),
            }
        })
    }

    /// `π ∝ (θη)⁻¹` with finite-difference partials.
    pub fn matching_fd() -> Self {
        Self::custom("matching-fd", |_, t, e| -t.ln() - e.ln())
    }

    /// `π ≡ 1`.
    pub fn flat() -> Self {
        Self::custom("flat", |_, _, _| 0.0).with_analytic(|_, _, _| PriorJet {
            pi: 1.0,
            ..PriorJet::default()
        })
    }

    /// Built-in by name: `matching`, `matching-fd` or `flat`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "matching" => Ok(Self::matching()),
            "matching-fd" | "matching_fd" => Ok(Self::matching_fd()),
            "flat" => Ok(Self::flat()),
            other => Err(Error::domain(format!("unknown prior `{other}`"))),
        }
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.analytic.is_some()
    }

    pub fn log_prior(&self, beta: f64, theta: f64, eta: f64) -> f64 {
        (self.log_prior)(beta, theta, eta)
    }

    pub fn threshold(&self) -> f64 {
        if self.has_analytic_partials() {
            ANALYTIC_THRESHOLD
        } else {
            FD_THRESHOLD
        }
    }

    /// Jet at a point, analytic if available, else central differences of `exp(ln π)`.
    pub fn jet(&self, beta: f64, theta: f64, eta: f64) -> Result<PriorJet> {
        let jet = match &self.analytic {
            Some(f) => f(beta, theta, eta),
            None => {
                let pi = |b: f64, t: f64, e: f64| self.log_prior(b, t, e).exp();
                let centre = pi(beta, theta, eta);
                let (hb, ht, he) = (FD_STEP * beta.abs().max(1.0), FD_STEP * theta, FD_STEP * eta);
                let (bp, bm) = (pi(beta + hb, theta, eta), pi(beta - hb, theta, eta));
                let (tp, tm) = (pi(beta, theta + ht, eta), pi(beta, theta - ht, eta));
                let (ep, em) = (pi(beta, theta, eta + he), pi(beta, theta, eta - he));
                PriorJet {
                    pi: centre,
                    d_beta: (bp - bm) / (2.0 * hb),
                    d_theta: (tp - tm) / (2.0 * ht),
                    d_eta: (ep - em) / (2.0 * he),
                    d_beta2: (bp - 2.0 * centre + bm) / (hb * hb),
                    d_theta2: (tp - 2.0 * centre + tm) / (ht * ht),
                    d_eta2: (ep - 2.0 * centre + em) / (he * he),
                }
            }
        };
        if !jet.is_finite() {
            return Err(Error::domain(format!(
                "prior `{}` is not finite near (beta, theta, eta) = ({beta}, {theta}, {eta})",
                self.name
            )));
        }
        Ok(jet)
    }

    /// `c·π`, for checking that conditions are linear.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.clone();
        let lc = c.ln();
        let mut out = PriorSpec::custom(format!("{}*{c}", self.name), {
            let inner = inner.clone();
            move |b, t, e| inner.log_prior(b, t, e) + lc
        });
        if let Some(f) = &self.analytic {
            let f = f.clone();
            out.analytic = Some(Arc::new(move |b, t, e| f(b, t, e).scaled(c)));
        }
        out
    }
}

/// The reduced matching conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MatchingCondition {
    #[serde(rename = "dist_fn_A1_beta")]
    DistFnA1Beta,
    #[serde(rename = "dist_fn_A2_beta")]
    DistFnA2Beta,
    #[serde(rename = "dist_fn_theta")]
    DistFnTheta,
    #[serde(rename = "dist_fn_eta_main")]
    DistFnEtaMain,
    #[serde(rename = "dist_fn_eta_aux")]
    DistFnEtaAux,
    #[serde(rename = "hpd_beta_pde")]
    HpdBeta,
    #[serde(rename = "hpd_theta_pde")]
    HpdTheta,
    #[serde(rename = "hpd_eta_pde")]
    HpdEta,
    #[serde(rename = "lr_beta_pde")]
    LrBeta,
    #[serde(rename = "lr_theta_pde")]
    LrTheta,
    #[serde(rename = "lr_eta_pde")]
    LrEta,
}

impl MatchingCondition {
    pub const ALL: [MatchingCondition; 11] = [
        MatchingCondition::DistFnA1Beta,
        MatchingCondition::DistFnA2Beta,
        MatchingCondition::DistFnTheta,
        MatchingCondition::DistFnEtaMain,
        MatchingCondition::DistFnEtaAux,
        MatchingCondition::HpdBeta,
        MatchingCondition::HpdTheta,
        MatchingCondition::HpdEta,
        MatchingCondition::LrBeta,
        MatchingCondition::LrTheta,
        MatchingCondition::LrEta,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            MatchingCondition::DistFnA1Beta => "dist_fn_A1_beta",
            MatchingCondition::DistFnA2Beta => "dist_fn_A2_beta",
            MatchingCondition::DistFnTheta => "dist_fn_theta",
            MatchingCondition::DistFnEtaMain => "dist_fn_eta_main",
            MatchingCondition::DistFnEtaAux => "dist_fn_eta_aux",
            MatchingCondition::HpdBeta => "hpd_beta_pde",
            MatchingCondition::HpdTheta => "hpd_theta_pde",
            MatchingCondition::HpdEta => "hpd_eta_pde",
            MatchingCondition::LrBeta => "lr_beta_pde",
            MatchingCondition::LrTheta => "lr_theta_pde",
            MatchingCondition::LrEta => "lr_eta_pde",
        }
    }

    /// Left-hand side as it is written before expansion.
    pub fn printed_form(&self) -> &'static str {
        match self {
            MatchingCondition::DistFnA1Beta => "d/dθ(θπ) + d/dη(ηπ)",
            MatchingCondition::DistFnA2Beta => "d/dβ((θ + η)π)",
            MatchingCondition::DistFnTheta => "d²/dθ²(θ²π) − 2 d/dθ(θ² dπ/dθ) − 12 d/dθ(θπ)",
            MatchingCondition::DistFnEtaMain => "d²/dη²(η²π) − 2 d/dη(η² dπ/dη) − d/dθ(θπ) − d/dη(ηπ)",
            MatchingCondition::DistFnEtaAux => "d/dη(3ηπ)",
            MatchingCondition::HpdBeta => "d/dθ(θπ) + d/dη(ηπ) − d²/dβ²(η²π)",
            MatchingCondition::HpdTheta => "−2 d/dθ(θπ) − d²/dθ²(θπ)",
            MatchingCondition::HpdEta => "d/dθ(θπ) + d/dη(ηπ) − d²/dη²(η²π)",
            MatchingCondition::LrBeta => "d/dθ(θπ) + d/dη(ηπ) + η² d²π/dβ²",
            MatchingCondition::LrTheta => "d/dθ(θ² dπ/dθ + 4θπ)",
            MatchingCondition::LrEta => "d/dθ(θπ) + d/dη(η² dπ/dη + 2ηπ)",
        }
    }

    /// Caveat printed alongside the residual, if any.
    pub fn note(&self) -> Option<&'static str> {
        match self {
            MatchingCondition::DistFnTheta => Some(
                "coefficient 12 is kept as stated; substituting E(d³ log f/dθ³) = 4/θ³ into the two \
                 repeated terms gives 8; both versions vanish for any π ∝ θ⁻¹g(β, η)",
            ),
            _ => None,
        }
    }

    /// Residual at `(β, θ, η)` from the prior jet there.
    pub fn residual(&self, j: &PriorJet, _beta: f64, theta: f64, eta: f64) -> f64 {
        let (t, e) = (theta, eta);
        let PriorJet {
            pi,
            d_beta: pb,
            d_theta: pt,
            d_eta: pe,
            d_beta2: pbb,
            d_theta2: ptt,
            d_eta2: pee,
        } = *j;
        match self {
            MatchingCondition::DistFnA1Beta => 2.0 * pi + t * pt + e * pe,
            MatchingCondition::DistFnA2Beta => (t + e) * pb,
            MatchingCondition::DistFnTheta => -10.0 * pi - 12.0 * t * pt - t * t * ptt,
            MatchingCondition::DistFnEtaMain => -e * e * pee - t * pt - e * pe,
            MatchingCondition::DistFnEtaAux => 3.0 * (pi + e * pe),
            MatchingCondition::HpdBeta => 2.0 * pi + t * pt + e * pe - e * e * pbb,
            MatchingCondition::HpdTheta => -2.0 * (pi + t * pt) - (2.0 * pt + t * ptt),
            MatchingCondition::HpdEta => t * pt - 3.0 * e * pe - e * e * pee,
            MatchingCondition::LrBeta => 2.0 * pi + t * pt + e * pe + e * e * pbb,
            MatchingCondition::LrTheta => 4.0 * pi + 6.0 * t * pt + t * t * ptt,
            MatchingCondition::LrEta => 3.0 * pi + t * pt + 4.0 * e * pe + e * e * pee,
        }
    }

    pub fn residual_at(&self, prior: &PriorSpec, beta: f64, theta: f64, eta: f64) -> Result<f64> {
        check_interior(theta, eta)?;
        Ok(self.residual(&prior.jet(beta, theta, eta)?, beta, theta, eta))
    }
}

impl fmt::Display for MatchingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MatchingCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::domain(format!("unknown matching condition `{s}`")))
    }
}

fn check_interior(theta: f64, eta: f64) -> Result<()> {
    if theta > 0.0 && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("grid must satisfy theta > 0 and eta > 0, got ({theta}, {eta})")))
    }
}

/// Evenly spaced values `lo, …, hi`; written `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || count == 0 {
            return Err(Error::domain(format!("bad grid axis {lo}:{hi}:{count}")));
        }
        Ok(Axis { lo, hi, count })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::domain(format!("grid axis must be lo:hi:count, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        Axis::new(lo, hi, count)
    }
}

/// Tensor grid in `(β, θ, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub beta: Axis,
    pub theta: Axis,
    pub eta: Axis,
}

impl Default for Grid {
    /// `β ∈ [−2, 2]`, `θ, η ∈ [0.5, 3]`, nine points per axis.
    fn default() -> Self {
        Grid {
            beta: Axis { lo: -2.0, hi: 2.0, count: 9 },
            theta: Axis { lo: 0.5, hi: 3.0, count: 9 },
            eta: Axis { lo: 0.5, hi: 3.0, count: 9 },
        }
    }
}

impl Grid {
    pub fn new(beta: Axis, theta: Axis, eta: Axis) -> Result<Self> {
        check_interior(theta.lo, eta.lo)?;
        Ok(Grid { beta, theta, eta })
    }

    pub fn len(&self) -> usize {
        self.beta.count * self.theta.count * self.eta.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `i`, with `η` varying fastest.
    pub fn point(&self, i: usize) -> (f64, f64, f64) {
        let k = i % self.eta.count;
        let j = (i / self.eta.count) % self.theta.count;
        let b = i / (self.eta.count * self.theta.count);
        (self.beta.value(b), self.theta.value(j), self.eta.value(k))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "beta={} theta={} eta={}", self.beta, self.theta, self.eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub condition: MatchingCondition,
    pub prior: String,
    pub grid: String,
    pub analytic: bool,
    pub max_abs_residual: f64,
    pub worst_point: (f64, f64, f64),
    pub threshold: f64,
    pub pass: bool,
}

type GridJets = Vec<((f64, f64, f64), PriorJet)>;

fn grid_jets(prior: &PriorSpec, grid: &Grid) -> Result<GridJets> {
    check_interior(grid.theta.lo, grid.eta.lo)?;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            prior.jet(p.0, p.1, p.2).map(|j| (p, j))
        })
        .collect()
}

fn scan(cond: MatchingCondition, prior: &PriorSpec, grid: &Grid, jets: &[((f64, f64, f64), PriorJet)]) -> Result<ResidualReport> {
    let mut worst = (f64::NEG_INFINITY, (f64::NAN, f64::NAN, f64::NAN));
    for &(p, j) in jets {
        let r = cond.residual(&j, p.0, p.1, p.2).abs();
        if !r.is_finite() {
            return Err(Error::domain(format!("non-finite {} residual at {p:?}", cond.id())));
        }
        if r > worst.0 {
            worst = (r, p);
        }
    }
    let threshold = prior.threshold();
    Ok(ResidualReport {
        condition: cond,
        prior: prior.name().to_string(),
        grid: grid.to_string(),
        analytic: prior.has_analytic_partials(),
        max_abs_residual: worst.0,
        worst_point: worst.1,
        threshold,
        pass: worst.0 <= threshold,
    })
}

/// Max absolute residual of one condition over the grid.
pub fn pde_residual(cond: MatchingCondition, prior: &PriorSpec, grid: &Grid) -> Result<ResidualReport> {
    scan(cond, prior, grid, &grid_jets(prior, grid)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorVerification {
    pub prior: String,
    pub reports: Vec<ResidualReport>,
}

impl PriorVerification {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn report(&self, cond: MatchingCondition) -> Option<&ResidualReport> {
        self.reports.iter().find(|r| r.condition == cond)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "condition_id",
            "prior",
            "max_abs_residual",
            "worst_beta",
            "worst_theta",
            "worst_eta",
            "pass",
        ])?;
        for r in &self.reports {
            w.write_record([
                r.condition.id().to_string(),
                r.prior.clone(),
                format!("{:e}", r.max_abs_residual),
                r.worst_point.0.to_string(),
                r.worst_point.1.to_string(),
                r.worst_point.2.to_string(),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table with notes.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let grid = self.reports.first().map(|r| r.grid.as_str()).unwrap_or("");
        out.push_str(&format!("prior: {}   grid: {grid}\n", self.prior));
        out.push_str(&format!(
            "{:<18} {:>12} {:>28}  {:<5} {}\n",
            "condition", "max |resid|", "worst (beta, theta, eta)", "pass", "equation"
        ));
        let mut notes = Vec::new();
        for r in &self.reports {
            let (b, t, e) = r.worst_point;
            let mark = if r.condition.note().is_some() {
                notes.push((r.condition.id(), r.condition.note().unwrap()));
                "*"
            } else {
                ""
            };
            out.push_str(&format!(
                "{:<18} {:>12.3e} {:>28}  {:<5} {}{mark}\n",
                r.condition.id(),
                r.max_abs_residual,
                format!("({b:.3}, {t:.3}, {e:.3})"),
                if r.pass { "yes" } else { "NO" },
                r.condition.printed_form()
            ));
        }
        for (id, note) in notes {
            out.push_str(&format!("* {id}: {note}\n"));
        }
        out.push_str(
            "quantile matching has no closed-form condition here; it is checked empirically by the coverage simulation\n",
        );
        out
    }
}

/// Every condition on one grid. Jets are computed once, in parallel.
pub fn verify_prior(prior: &PriorSpec, grid: &Grid) -> Result<PriorVerification> {
    let jets = grid_jets(prior, grid)?;
    let reports = MatchingCondition::ALL
        .iter()
        .map(|&c| scan(c, prior, grid, &jets))
        .collect::<Result<Vec<_>>>()?;
    Ok(PriorVerification {
        prior: prior.name().to_string(),
        reports,
    })
}

/// One of the displayed third-order expectation identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LemmaMoment {
    BetaScoreCubed,
    BetaScoreTimesSecond,
    BetaBetaBeta,
    BetaBetaTheta,
    BetaBetaEta,
    BetaThetaTheta,
    BetaEtaEta,
    ThetaScoreCubed,
    ThetaScoreTimesSecond,
    ThetaThetaTheta,
    ThetaThetaEta,
    ThetaEtaEta,
    EtaScoreCubed,
    EtaScoreTimesSecond,
    EtaEtaEta,
}

enum Integrand {
    ScoreCubed(usize),
    ScoreTimesSecond(usize),
    Third(DerivOrder),
}

impl LemmaMoment {
    pub const ALL: [LemmaMoment; 15] = [
        LemmaMoment::BetaScoreCubed,
        LemmaMoment::BetaScoreTimesSecond,
        LemmaMoment::BetaBetaBeta,
        LemmaMoment::BetaBetaTheta,
        LemmaMoment::BetaBetaEta,
        LemmaMoment::BetaThetaTheta,
        LemmaMoment::BetaEtaEta,
        LemmaMoment::ThetaScoreCubed,
        LemmaMoment::ThetaScoreTimesSecond,
        LemmaMoment::ThetaThetaTheta,
        LemmaMoment::ThetaThetaEta,
        LemmaMoment::ThetaEtaEta,
        LemmaMoment::EtaScoreCubed,
        LemmaMoment::EtaScoreTimesSecond,
        LemmaMoment::EtaEtaEta,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            LemmaMoment::BetaScoreCubed => "E[(dl/dbeta)^3]",
            LemmaMoment::BetaScoreTimesSecond => "E[(dl/dbeta)(d2l/dbeta2)]",
            LemmaMoment::BetaBetaBeta => "E[d3l/dbeta3]",
            LemmaMoment::BetaBetaTheta => "E[d3l/dbeta2 dtheta]",
            LemmaMoment::BetaBetaEta => "E[d3l/dbeta2 deta]",
            LemmaMoment::BetaThetaTheta => "E[d3l/dbeta dtheta2]",
            LemmaMoment::BetaEtaEta => "E[d3l/dbeta deta2]",
            LemmaMoment::ThetaScoreCubed => "E[(dl/dtheta)^3]",
            LemmaMoment::ThetaScoreTimesSecond => "E[(dl/dtheta)(d2l/dtheta2)]",
            LemmaMoment::ThetaThetaTheta => "E[d3l/dtheta3]",
            LemmaMoment::ThetaThetaEta => "E[d3l/dtheta2 deta]",
            LemmaMoment::ThetaEtaEta => "E[d3l/dtheta deta2]",
            LemmaMoment::EtaScoreCubed => "E[(dl/deta)^3]",
            LemmaMoment::EtaScoreTimesSecond => "E[(dl/deta)(d2l/deta2)]",
            LemmaMoment::EtaEtaEta => "E[d3l/deta3]",
        }
    }

    /// Closed-form value; depends on `θ` and `η` only.
    pub fn claimed(&self, theta: f64, eta: f64) -> f64 {
        let (t, e) = (theta, eta);
        match self {
            LemmaMoment::BetaBetaTheta | LemmaMoment::ThetaEtaEta => 1.0 / (t * e * e),
            LemmaMoment::BetaBetaEta => e.powi(-3),
            LemmaMoment::ThetaScoreCubed => 2.0 / t.powi(3),
            LemmaMoment::ThetaScoreTimesSecond => -2.0 / t.powi(3),
            LemmaMoment::ThetaThetaTheta => 4.0 / t.powi(3),
            LemmaMoment::EtaScoreTimesSecond => -e.powi(-3),
            LemmaMoment::EtaEtaEta => 3.0 * e.powi(-3),
            _ => 0.0,
        }
    }

    fn integrand(&self) -> Integrand {
        use Integrand::*;
        match self {
            LemmaMoment::BetaScoreCubed => ScoreCubed(0),
            LemmaMoment::BetaScoreTimesSecond => ScoreTimesSecond(0),
            LemmaMoment::BetaBetaBeta => Third(DerivOrder::new(3, 0, 0)),
            LemmaMoment::BetaBetaTheta => Third(DerivOrder::new(2, 1, 0)),
            LemmaMoment::BetaBetaEta => Third(DerivOrder::new(2, 0, 1)),
            LemmaMoment::BetaThetaTheta => Third(DerivOrder::new(1, 2, 0)),
            LemmaMoment::BetaEtaEta => Third(DerivOrder::new(1, 0, 2)),
            LemmaMoment::ThetaScoreCubed => ScoreCubed(1),
            LemmaMoment::ThetaScoreTimesSecond => ScoreTimesSecond(1),
            LemmaMoment::ThetaThetaTheta => Third(DerivOrder::new(0, 3, 0)),
            LemmaMoment::ThetaThetaEta => Third(DerivOrder::new(0, 2, 1)),
            LemmaMoment::ThetaEtaEta => Third(DerivOrder::new(0, 1, 2)),
            LemmaMoment::EtaScoreCubed => ScoreCubed(2),
            LemmaMoment::EtaScoreTimesSecond => ScoreTimesSecond(2),
            LemmaMoment::EtaEtaEta => Third(DerivOrder::new(0, 0, 3)),
        }
    }
}

impl fmt::Display for LemmaMoment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for LemmaMoment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

/// Monte Carlo estimate of one moment against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationCheck {
    pub moment: LemmaMoment,
    pub beta: f64,
    pub theta: f64,
    pub eta: f64,
    pub claimed_value: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub n_samples: usize,
    /// `|estimate − claimed| ≤ 4·stderr`.
    pub pass: bool,
}

const LEMMA_CHUNK: usize = 1 << 15;

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

/// Estimate each moment by averaging derivative products of `log f` over
/// `n_samples` draws from the model at `p`.
///
/// Draws are split into fixed-size chunks with their own derived seeds, so the
/// result does not depend on the thread count.
pub fn verify_lemma21(p: &OrthogonalParams, n_samples: usize, seed: u64) -> Result<Vec<ExpectationCheck>> {
    p.validate()?;
    if n_samples < MIN_LEMMA_SAMPLES {
        return Err(Error::domain(format!(
            "need at least {MIN_LEMMA_SAMPLES} samples, got {n_samples}"
        )));
    }
    let original = p.to_original();
    let chunks = n_samples.div_ceil(LEMMA_CHUNK);
    let per_chunk: Vec<[Moments; 15]> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<[Moments; 15]> {
            let len = LEMMA_CHUNK.min(n_samples - c * LEMMA_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x1e44a, c as u64));
            let mut xs = Vec::with_capacity(len);
            sample_into(&original, len, &mut rng, &mut xs);
            let mut acc = [Moments::default(); 15];
            for &(x1, x2) in &xs {
                let d = |b, t, e| log_density_partial(p, x1, x2, DerivOrder::new(b, t, e));
                let first = [d(1, 0, 0)?, d(0, 1, 0)?, d(0, 0, 1)?];
                let second = [d(2, 0, 0)?, d(0, 2, 0)?, d(0, 0, 2)?];
                for (slot, m) in acc.iter_mut().zip(LemmaMoment::ALL) {
                    let v = match m.integrand() {
                        Integrand::ScoreCubed(a) => first[a].powi(3),
                        Integrand::ScoreTimesSecond(a) => first[a] * second[a],
                        Integrand::Third(o) => d(o.beta, o.theta, o.eta)?,
                    };
                    slot.push(v);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = [Moments::default(); 15];
    for chunk in per_chunk {
        for (t, c) in total.iter_mut().zip(chunk) {
            *t = t.merge(c);
        }
    }
    let [beta, theta, eta] = p.interest();
    Ok(LemmaMoment::ALL
        .iter()
        .zip(total)
        .map(|(&m, acc)| {
            let claimed = m.claimed(theta, eta);
            let sd = (acc.m2 / (acc.n - 1.0)).max(0.0).sqrt();
            // Identically-zero integrands have zero spread; floor at rounding level.
            let floor = 16.0 * f64::EPSILON * (1.0 + claimed.abs() + acc.mean.abs());
            let stderr = (sd / acc.n.sqrt()).max(floor);
            ExpectationCheck {
                moment: m,
                beta,
                theta,
                eta,
                claimed_value: claimed,
                mc_estimate: acc.mean,
                mc_stderr: stderr,
                n_samples,
                pass: (acc.mean - claimed).abs() <= 4.0 * stderr,
            }
        })
        .collect())
}

pub fn write_lemma_csv<W: Write>(checks: &[ExpectationCheck], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "moment", "beta", "theta", "eta", "claimed", "estimate", "stderr", "n_samples", "pass",
    ])?;
    for c in checks {
        w.write_record([
            c.moment.label().to_string(),
            c.beta.to_string(),
            c.theta.to_string(),
            c.eta.to_string(),
            c.claimed_value.to_string(),
            c.mc_estimate.to_string(),
            c.mc_stderr.to_string(),
            c.n_samples.to_string(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
