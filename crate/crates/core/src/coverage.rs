//! Frequentist coverage of credible intervals under the matching prior.
//!
//! Each replicate draws a fresh dataset from a fixed truth, builds intervals
//! for `β`, `θ` and `η`, and records whether they contain the true values.
//! The posterior CDF at the true value is recorded too: under exact matching it
//! is Uniform(0, 1) across replicates, which the report tests by Kolmogorov–Smirnov.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{hpd_beta, hpd_unimodal_with, interval, HpdOptions, IntervalKind};
use crate::model::{derive_seed, sample_into, sufficient_stats, OriginalParams};
use crate::posterior::{posterior, ParamId, PosteriorDistribution, UnivariateDensity};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_REPLICATES: usize = 5000;
pub const MIN_REPLICATES: usize = 100;

/// The interest parameters covered by the simulation, in output order.
pub const COVERED: [ParamId; 3] = [ParamId::Beta, ParamId::Theta, ParamId::Eta];

pub const TABLE_RHOS: [f64; 3] = [0.25, 0.5, 0.75];
pub const TABLE_NS: [usize; 5] = [4, 8, 12, 16, 20];

/// Reference coverage of 95% HPD intervals with `σ₁ = σ₂ = 1`, 5000
/// replicates per cell: `(ρ, n, [β, θ, η])`.
pub const REFERENCE_TABLE: [(f64, usize, [f64; 3]); 15] = [
    (0.25, 4, [0.952, 0.947, 0.949]),
    (0.25, 8, [0.946, 0.955, 0.950]),
    (0.25, 12, [0.954, 0.952, 0.948]),
    (0.25, 16, [0.952, 0.954, 0.950]),
    (0.25, 20, [0.945, 0.948, 0.950]),
    (0.50, 4, [0.950, 0.952, 0.949]),
    (0.50, 8, [0.944, 0.952, 0.948]),
    (0.50, 12, [0.954, 0.953, 0.944]),
    (0.50, 16, [0.946, 0.950, 0.949]),
    (0.50, 20, [0.952, 0.948, 0.949]),
    (0.75, 4, [0.955, 0.952, 0.953]),
    (0.75, 8, [0.953, 0.948, 0.949]),
    (0.75, 12, [0.950, 0.946, 0.947]),
    (0.75, 16, [0.948, 0.946, 0.951]),
    (0.75, 20, [0.956, 0.946, 0.951]),
];

/// Reference coverage for one cell and parameter, if tabulated.
pub fn reference_coverage(rho: f64, n: usize, param: ParamId) -> Option<f64> {
    let col = COVERED.iter().position(|&p| p == param)?;
    REFERENCE_TABLE
        .iter()
        .find(|(r, m, _)| *r == rho && *m == n)
        .map(|(_, _, v)| v[col])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageCellSpec {
    pub rho: f64,
    pub n: usize,
    pub level: f64,
    pub replicates: usize,
    pub kind: IntervalKind,
    /// `ρ` here is ignored; the cell's own `rho` is used.
    pub params_base: OriginalParams,
    pub seed: u64,
}

impl CoverageCellSpec {
    /// 95% HPD, 5000 replicates, `μ = 0`, `σ₁ = σ₂ = 1`, default seed.
    pub fn new(rho: f64, n: usize) -> Self {
        CoverageCellSpec {
            rho,
            n,
            level: 0.95,
            replicates: DEFAULT_REPLICATES,
            kind: IntervalKind::Hpd,
            params_base: OriginalParams {
                mu1: 0.0,
                mu2: 0.0,
                sigma1: 1.0,
                sigma2: 1.0,
                rho: 0.0,
            },
            seed: DEFAULT_SEED,
        }
    }

    pub fn truth(&self) -> Result<OriginalParams> {
        let p = OriginalParams {
            rho: self.rho,
            ..self.params_base
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.truth()?;
        if self.n < 4 {
            return Err(Error::domain(format!("coverage needs n >= 4, got {}", self.n)));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::domain(format!(
                "coverage needs at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::domain(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.kind == IntervalKind::HpdBoundary {
            return Err(Error::domain("hpd_boundary is a result kind, not a request"));
        }
        Ok(())
    }

    /// Stream key of the cell; depends on `(ρ, n)` only, so a cell gives the
    /// same numbers alone or inside a table.
    pub fn cell_key(&self) -> u64 {
        derive_seed(self.rho.to_bits(), self.n as u64, 0)
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, self.cell_key(), r as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCoverage {
    pub param: ParamId,
    pub coverage: f64,
    /// `√(p̂(1 − p̂)/replicates)`.
    pub stderr: f64,
    /// Replicates in the denominator.
    pub replicates: usize,
    /// Degenerate datasets plus interval failures for this parameter.
    pub failures: usize,
    /// KS distance of the posterior CDF at the truth from Uniform(0, 1).
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub rho: f64,
    pub n: usize,
    pub kind: IntervalKind,
    pub level: f64,
    pub replicates_requested: usize,
    pub degenerate: usize,
    pub params: Vec<ParamCoverage>,
}

impl CellReport {
    pub fn param(&self, p: ParamId) -> Option<&ParamCoverage> {
        self.params.iter().find(|c| c.param == p)
    }
}

#[derive(Debug, Clone, Copy)]
struct ParamOutcome {
    covered: Option<bool>,
    cdf_at_truth: f64,
}

fn interval_with_retry(d: &PosteriorDistribution, kind: IntervalKind, level: f64) -> Result<(f64, f64)> {
    let i = match (kind, d.param()) {
        (IntervalKind::Hpd, ParamId::Beta) => hpd_beta(d.stats(), level)?,
        (IntervalKind::Hpd, _) => match hpd_unimodal_with(d, level, &HpdOptions::default()) {
            Ok(i) => i,
            Err(_) => hpd_unimodal_with(d, level, &HpdOptions::widened())?,
        },
        _ => interval(d, kind, level)?,
    };
    Ok((i.lo, i.hi))
}

fn replicate(spec: &CoverageCellSpec, truth: &OriginalParams, targets: [f64; 3], r: usize) -> Option<[ParamOutcome; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.replicate_seed(r));
    let mut data = Vec::with_capacity(spec.n);
    sample_into(truth, spec.n, &mut rng, &mut data);
    let stats = sufficient_stats(&data).ok()?;
    let mut out = [ParamOutcome {
        covered: None,
        cdf_at_truth: f64::NAN,
    }; 3];
    for (slot, (&param, &target)) in out.iter_mut().zip(COVERED.iter().zip(&targets)) {
        let Ok(d) = posterior(param, &stats) else {
            continue;
        };
        slot.cdf_at_truth = d.cdf(target);
        slot.covered = interval_with_retry(&d, spec.kind, spec.level)
            .ok()
            .map(|(lo, hi)| lo <= target && target <= hi);
    }
    Some(out)
}

/// Simulate one cell. Deterministic in `spec`, whatever the thread count.
pub fn run_cell(spec: &CoverageCellSpec) -> Result<CellReport> {
    spec.validate()?;
    let truth = spec.truth()?;
    let [beta, theta, eta] = truth.to_orthogonal().interest();
    let targets = [beta, theta, eta];
    let outcomes: Vec<Option<[ParamOutcome; 3]>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| replicate(spec, &truth, targets, r))
        .collect();

    let degenerate = outcomes.iter().filter(|o| o.is_none()).count();
    let params = COVERED
        .iter()
        .enumerate()
        .map(|(k, &param)| {
            let mut hits = 0usize;
            let mut used = 0usize;
            let mut cdfs = Vec::with_capacity(outcomes.len());
            for o in outcomes.iter().flatten() {
                if let Some(c) = o[k].covered {
                    used += 1;
                    hits += c as usize;
                }
                if o[k].cdf_at_truth.is_finite() {
                    cdfs.push(o[k].cdf_at_truth);
                }
            }
            let coverage = if used > 0 { hits as f64 / used as f64 } else { f64::NAN };
            let (ks_statistic, ks_p_value) = ks_uniform(&cdfs);
            ParamCoverage {
                param,
                coverage,
                stderr: (coverage * (1.0 - coverage) / used as f64).sqrt(),
                replicates: used,
                failures: spec.replicates - used,
                ks_statistic,
                ks_p_value,
            }
        })
        .collect();
    Ok(CellReport {
        rho: spec.rho,
        n: spec.n,
        kind: spec.kind,
        level: spec.level,
        replicates_requested: spec.replicates,
        degenerate,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellError {
    pub rho: f64,
    pub n: usize,
    pub message: String,
    /// Whether the failure was numerical rather than a bad specification.
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub cells: Vec<CellReport>,
    /// Cells that could not be run; the others are unaffected.
    pub errors: Vec<CellError>,
}

impl CoverageReport {
    pub fn cell(&self, rho: f64, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.rho == rho && c.n == n)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rho", "n", "param", "kind", "level", "coverage", "stderr", "replicates", "failures"])?;
        for c in &self.cells {
            for p in &c.params {
                w.write_record([
                    c.rho.to_string(),
                    c.n.to_string(),
                    p.param.to_string(),
                    c.kind.to_string(),
                    c.level.to_string(),
                    format!("{:.4}", p.coverage),
                    format!("{:.4}", p.stderr),
                    p.replicates.to_string(),
                    p.failures.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per cell, `ρ` printed on the first row of its block.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if let Some(c) = self.cells.first() {
            out.push_str(&format!(
                "Coverage of {}% {} intervals\n\n",
                100.0 * c.level,
                c.kind.as_str().replace('_', "-")
            ));
        }
        out.push_str("| ρ | n | β | θ | η |\n|---|---|---|---|---|\n");
        let mut last_rho = f64::NAN;
        for c in &self.cells {
            let rho = if c.rho == last_rho { String::new() } else { format!("{:.2}", c.rho) };
            last_rho = c.rho;
            let vals: Vec<String> = c.params.iter().map(|p| format!("{:.3}", p.coverage)).collect();
            out.push_str(&format!("| {rho} | {} | {} |\n", c.n, vals.join(" | ")));
        }
        for e in &self.errors {
            out.push_str(&format!("\nρ = {}, n = {}: {}\n", e.rho, e.n, e.message));
        }
        out
    }
}

/// Run every `(ρ, n)` cell, ordered by `ρ` then `n`, both ascending.
pub fn run_table(rhos: &[f64], ns: &[usize], defaults: &CoverageCellSpec) -> Result<CoverageReport> {
    if rhos.is_empty() || ns.is_empty() {
        return Err(Error::domain("coverage grids must be nonempty"));
    }
    let mut rhos = rhos.to_vec();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let specs: Vec<CoverageCellSpec> = rhos
        .iter()
        .flat_map(|&rho| ns.iter().map(move |&n| CoverageCellSpec { rho, n, ..*defaults }))
        .collect();
    let results: Vec<Result<CellReport>> = specs.par_iter().map(run_cell).collect();
    let mut report = CoverageReport {
        cells: Vec::new(),
        errors: Vec::new(),
    };
    for (spec, r) in specs.iter().zip(results) {
        match r {
            Ok(c) => report.cells.push(c),
            Err(e) => report.errors.push(CellError {
                rho: spec.rho,
                n: spec.n,
                message: e.to_string(),
                numerical: e.is_numerical(),
            }),
        }
    }
    Ok(report)
}

/// Kolmogorov–Smirnov test of `values` against Uniform(0, 1).
///
/// Returns the statistic `D` and the asymptotic p-value with Stephens'
/// small-sample correction `λ = (√m + 0.12 + 0.11/√m)·D`.
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut u = values.to_vec();
    u.sort_by(f64::total_cmp);
    let mf = m as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / mf - x).max(x - i as f64 / mf)
        })
        .fold(0.0, f64::max);
    let sq = mf.sqrt();
    (d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d))
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // Series below converges slowly here; the true value is 1 to 1e−8.
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
