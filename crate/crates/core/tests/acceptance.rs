//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use bvn_prior::coverage::{
    reference_coverage, run_cell, run_table, CoverageCellSpec, CoverageReport, COVERED, DEFAULT_SEED, TABLE_NS,
    TABLE_RHOS,
};
use bvn_prior::interval::{hpd_beta, hpd_unimodal};
use bvn_prior::matching::{verify_lemma21, verify_prior, Grid, MatchingCondition, PriorSpec};
use bvn_prior::model::{OrthogonalParams, SufficientStats};
use bvn_prior::numerics::{integrate_with, QuadOptions};
use bvn_prior::posterior::{
    beta_posterior, eta_posterior, posterior, precision_posterior, theta_posterior, ParamId, UnivariateDensity,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
        notes: Vec::new(),
    }
}

fn table() -> CoverageReport {
    let defaults = CoverageCellSpec::new(0.0, 4);
    run_table(&TABLE_RHOS, &TABLE_NS, &defaults).expect("coverage table")
}

fn criterion_1(report: &CoverageReport) -> Outcome {
    const TOL: f64 = 0.015;
    let mut worst = (0.0, String::new());
    let mut within = 0;
    let mut notes = Vec::new();
    for c in &report.cells {
        for p in &c.params {
            let want = reference_coverage(c.rho, c.n, p.param).expect("tabulated cell");
            let diff = (p.coverage - want).abs();
            if diff <= TOL {
                within += 1;
            } else {
                notes.push(format!(
                    "rho = {}, n = {}, {}: {:.4} vs {:.3}",
                    c.rho, c.n, p.param, p.coverage, want
                ));
            }
            if diff > worst.0 {
                worst = (diff, format!("rho = {}, n = {}, {}", c.rho, c.n, p.param));
            }
            if p.failures > 0 {
                notes.push(format!("rho = {}, n = {}, {}: {} failed replicates", c.rho, c.n, p.param, p.failures));
            }
        }
    }
    let total = report.cells.len() * COVERED.len();
    let mut o = outcome(
        within == 45 && total == 45 && report.errors.is_empty(),
        format!(
            "coverage table: {within}/{total} cells within ±{TOL} of the reference (max |diff| {:.4} at {})",
            worst.0, worst.1
        ),
    );
    o.notes = notes;
    o
}

fn criterion_2(report: &CoverageReport) -> Outcome {
    const ALPHA: f64 = 0.01;
    let mut notes = Vec::new();
    let mut passed = 0;
    let mut min_p = (1.0, String::new());
    for c in &report.cells {
        for p in &c.params {
            if p.ks_p_value >= ALPHA {
                passed += 1;
            } else {
                notes.push(format!(
                    "rho = {}, n = {}, {}: D = {:.4}, p = {:.4}",
                    c.rho, c.n, p.param, p.ks_statistic, p.ks_p_value
                ));
            }
            if p.ks_p_value < min_p.0 {
                min_p = (p.ks_p_value, format!("rho = {}, n = {}, {}", c.rho, c.n, p.param));
            }
        }
    }
    let total = report.cells.len() * COVERED.len();
    let mut o = outcome(
        passed == total,
        format!(
            "posterior CDF at truth uniform: {passed}/{total} KS tests with p >= {ALPHA} (smallest p {:.4} at {})",
            min_p.0, min_p.1
        ),
    );
    o.notes = notes;
    o
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut passed = 0;
    let mut total = 0;
    let mut notes = Vec::new();
    for k in 0..5 {
        let p = OrthogonalParams::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
        )
        .unwrap();
        let checks = verify_lemma21(&p, 1_000_000, 1000 + k).unwrap();
        for c in checks {
            total += 1;
            if c.pass {
                passed += 1;
            } else {
                notes.push(format!(
                    "{} at (beta, theta, eta) = ({:.3}, {:.3}, {:.3}): {:.5} vs {:.5} ± {:.1e}",
                    c.moment, c.beta, c.theta, c.eta, c.mc_estimate, c.claimed_value, c.mc_stderr
                ));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut o = outcome(
        passed == total && total == 75 && secs < 60.0,
        format!("expectation identities: {passed}/{total} checks within 4 stderr at 1e6 samples, 5 points, {secs:.1} s"),
    );
    o.notes = notes;
    o
}

fn criterion_4() -> Outcome {
    let grid = Grid::default();
    let exact = verify_prior(&PriorSpec::matching(), &grid).unwrap();
    let fd = verify_prior(&PriorSpec::matching_fd(), &grid).unwrap();
    let max_exact = exact.reports.iter().map(|r| r.max_abs_residual).fold(0.0, f64::max);
    let max_fd = fd.reports.iter().map(|r| r.max_abs_residual).fold(0.0, f64::max);
    let mut flat_dev: f64 = 0.0;
    for i in 0..grid.len() {
        let (b, t, e) = grid.point(i);
        let r = MatchingCondition::HpdTheta.residual_at(&PriorSpec::flat(), b, t, e).unwrap();
        flat_dev = flat_dev.max((r + 2.0).abs());
    }
    outcome(
        exact.reports.len() == 11 && max_exact <= 1e-12 && max_fd <= 1e-6 && flat_dev <= 1e-8,
        format!(
            "matching conditions: max residual {max_exact:.1e} analytic, {max_fd:.1e} finite-difference over 11 conditions; \
             flat prior hpd_theta_pde residual -2 ± {flat_dev:.1e}"
        ),
    )
}

fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-11,
        max_segments: 4000,
    };
    integrate_with(f, lo, hi, opts).unwrap().value
}

fn criterion_5() -> Outcome {
    let s = SufficientStats::new(10, 0.3, -0.2, 9.0, 2.4, 4.0).unwrap();

    // β: integrate θ and η out of the joint posterior, then normalize over β.
    let joint = |b: f64, t: f64, e: f64| {
        let q = s.s22 - 2.0 * b * s.s12 + b * b * s.s11;
        (-(s.n as f64) * t.ln() - e.ln() - q / (2.0 * t * e) - e * s.s11 / (2.0 * t)).exp()
    };
    let marginal = |b: f64| quad(|e| quad(|t| joint(b, t, e), 0.0, f64::INFINITY), 0.0, f64::INFINITY);
    let d = beta_posterior(&s).unwrap();
    let centre = d.mode();
    let spread = (s.s22_1 / (8.0 * s.s11)).sqrt();
    let z = quad(|u| marginal(centre + spread * u) * spread, -40.0, 40.0);
    let mut beta_err: f64 = 0.0;
    for i in 0..20 {
        let b = centre + spread * (-4.0 + 8.0 * i as f64 / 19.0);
        beta_err = beta_err.max((marginal(b) / z - d.pdf(b)).abs());
    }

    let mut eta_err: f64 = 0.0;
    for (n, s11, s12, s22) in [(4, 1.0, 0.1, 2.0), (10, 9.0, 2.4, 4.0)] {
        let st = SufficientStats::new(n, 0.0, 0.0, s11, s12, s22).unwrap();
        let e = eta_posterior(&st).unwrap();
        for i in 0..25 {
            let x = e.mode() * (0.05 + 5.0 * i as f64 / 24.0);
            eta_err = eta_err.max((e.eta_cdf_closed_form(x).unwrap() - e.eta_cdf_quadrature(x).unwrap()).abs());
        }
    }

    let (t, w) = (theta_posterior(&s).unwrap(), precision_posterior(&s).unwrap());
    let mut recip_err: f64 = 0.0;
    for i in 1..=50 {
        let x = 0.05 * i as f64;
        recip_err = recip_err.max((t.cdf(x) + w.cdf(1.0 / x) - 1.0).abs());
    }
    outcome(
        beta_err <= 1e-5 && eta_err <= 1e-8 && recip_err <= 1e-10,
        format!(
            "posterior oracles: beta pdf vs joint quadrature {beta_err:.1e} (20 points), \
             eta cdf identity vs quadrature {eta_err:.1e} (50 points), F_theta(t) + F_w(1/t) - 1 {recip_err:.1e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let fixtures = [
        SufficientStats::new(10, 0.0, 0.0, 9.0, 0.0, 4.0).unwrap(),
        SufficientStats::new(4, 0.0, 0.0, 1.3, 0.4, 0.9).unwrap(),
        SufficientStats::new(25, 0.0, 0.0, 20.0, -8.0, 11.0).unwrap(),
    ];
    let (mut mass, mut dens, mut beta_gap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in &fixtures {
        for p in ParamId::ALL {
            let d = posterior(p, s).unwrap();
            for level in [0.9, 0.95, 0.99] {
                let i = hpd_unimodal(&d, level).unwrap();
                mass = mass.max((i.achieved_mass - level).abs());
                dens = dens.max((d.pdf(i.lo) - d.pdf(i.hi)).abs() / d.pdf(i.lo).max(d.pdf(i.hi)));
                if p == ParamId::Beta {
                    let c = hpd_beta(s, level).unwrap();
                    beta_gap = beta_gap.max((c.lo - i.lo).abs()).max((c.hi - i.hi).abs());
                }
            }
        }
    }
    let r = &fixtures[0];
    let t = hpd_unimodal(&theta_posterior(r).unwrap(), 0.95).unwrap();
    let w = hpd_unimodal(&precision_posterior(r).unwrap(), 0.95).unwrap();
    let recip = (1.0 / t.hi - w.lo).abs().max((1.0 / t.lo - w.hi).abs());
    outcome(
        mass <= 1e-6 && dens <= 1e-6 && beta_gap <= 1e-8 && recip > 1e-3,
        format!(
            "HPD contracts: mass error {mass:.1e}, endpoint density gap {dens:.1e}, \
             closed-form vs solver for beta {beta_gap:.1e}, theta/w reciprocal gap {recip:.3}"
        ),
    )
}

fn run_bin(args: &[&str], threads: usize) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_bvn-prior"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("binary runs");
    assert!(out.status.success() || out.status.code() == Some(1), "{args:?}: {:?}", out.status);
    out.stdout
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let data_s = data.to_str().unwrap();
    run_bin(&["sample", "--rho", "0.6", "--n", "30", "--seed", "5", "--output", data_s], 1);
    let commands: Vec<Vec<&str>> = vec![
        vec!["sample", "--rho", "0.6", "--n", "30", "--seed", "5"],
        vec!["stats", "--input", data_s],
        vec!["posterior", "--input", data_s, "--param", "eta"],
        vec!["interval", "--input", data_s, "--param", "theta"],
        vec!["coverage", "--rhos", "0.25,0.75", "--ns", "4,12", "--replicates", "400", "--format", "csv", "--seed", "9"],
        vec!["verify-lemma", "--samples", "200000", "--seed", "3", "--format", "csv"],
        vec!["verify-prior", "--prior", "matching-fd", "--format", "csv"],
    ];
    let mut identical = 0;
    let mut notes = Vec::new();
    for args in &commands {
        let a = run_bin(args, 1);
        let b = run_bin(args, 1);
        let c = run_bin(args, 4);
        if a == b && a == c && !a.is_empty() {
            identical += 1;
        } else {
            notes.push(format!("{} differs between runs", args[0]));
        }
    }
    let spec = CoverageCellSpec {
        replicates: 500,
        ..CoverageCellSpec::new(0.5, 8)
    };
    let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
    let one = pool(1).install(|| run_cell(&spec).unwrap());
    let four = pool(4).install(|| run_cell(&spec).unwrap());
    let lib_same = one == four && one == run_cell(&CoverageCellSpec { seed: DEFAULT_SEED, ..spec }).unwrap();
    let mut o = outcome(
        identical == commands.len() && lib_same,
        format!(
            "determinism: {identical}/{} commands byte-identical across reruns and 1 vs 4 workers; \
             library coverage cell identical across pools: {lib_same}",
            commands.len()
        ),
    );
    o.notes = notes;
    o
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let start = Instant::now();
    let table = catch_unwind(table).ok();
    let results: Vec<(usize, Outcome)> = vec![
        (1, guarded(|| criterion_1(table.as_ref().expect("coverage table")))),
        (2, guarded(|| criterion_2(table.as_ref().expect("coverage table")))),
        (3, guarded(criterion_3)),
        (4, guarded(criterion_4)),
        (5, guarded(criterion_5)),
        (6, guarded(criterion_6)),
        (7, guarded(criterion_7)),
    ];
    println!();
    let mut failed = 0;
    for (k, o) in &results {
        println!("criterion {k} [{}] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        for n in &o.notes {
            println!("    {n}");
        }
        failed += usize::from(!o.pass);
    }
    println!(
        "\nacceptance: {} passed, {failed} failed, {:.1} s\n",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
