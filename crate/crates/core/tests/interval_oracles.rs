use bvn_prior::interval::{hpd_beta, hpd_unimodal};
use bvn_prior::model::{sample, sufficient_stats, OriginalParams, SufficientStats};
use bvn_prior::posterior::{eta_posterior, posterior, theta_posterior, ParamId, UnivariateDensity};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> SufficientStats {
    SufficientStats::new(10, 0.0, 0.0, 9.0, 0.0, 4.0).unwrap()
}

/// Highest-density set on a uniform grid: sort cells by density, keep the
/// densest until the kept mass reaches `level`.
fn grid_hpd<D: UnivariateDensity>(d: &D, lo: f64, hi: f64, points: usize, level: f64) -> (f64, f64, f64) {
    let h = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
    let dens: Vec<f64> = xs.iter().map(|&x| d.pdf(x)).collect();
    let mut order: Vec<usize> = (0..points).collect();
    order.sort_by(|&a, &b| dens[b].total_cmp(&dens[a]));
    let total: f64 = dens.iter().sum();
    let (mut acc, mut left, mut right) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for i in order {
        acc += dens[i] / total;
        left = left.min(xs[i]);
        right = right.max(xs[i]);
        if acc >= level {
            break;
        }
    }
    (left, right, h)
}

#[test]
fn theta_hpd_matches_grid_sweep() {
    let d = theta_posterior(&reference()).unwrap();
    let (gl, gr, h) = grid_hpd(&d, 1e-6, 6.0, 100_000, 0.95);
    let i = hpd_unimodal(&d, 0.95).unwrap();
    assert!((i.lo - gl).abs() < 3.0 * h, "{} vs {gl}", i.lo);
    assert!((i.hi - gr).abs() < 3.0 * h, "{} vs {gr}", i.hi);
}

#[test]
fn eta_hpd_matches_grid_sweep() {
    let d = eta_posterior(&reference()).unwrap();
    let (gl, gr, h) = grid_hpd(&d, 1e-6, 4.0, 100_000, 0.9);
    let i = hpd_unimodal(&d, 0.9).unwrap();
    assert!((i.lo - gl).abs() < 3.0 * h && (i.hi - gr).abs() < 3.0 * h);
}

#[test]
fn hpd_is_shortest_at_its_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = SufficientStats::new(8, 0.0, 0.0, 3.0, 1.1, 2.0).unwrap();
    for p in ParamId::ALL {
        let d = posterior(p, &s).unwrap();
        let hpd = hpd_unimodal(&d, 0.9).unwrap();
        let lo_mass = d.cdf(hpd.lo);
        for _ in 0..20 {
            // Slide the lower tail mass; keep the total at 0.9.
            let shifted = (lo_mass + rng.random_range(-0.5..0.5) * lo_mass.min(0.1 - lo_mass)).clamp(1e-9, 0.1 - 1e-9);
            let lo = d.quantile(shifted).unwrap();
            let hi = d.quantile(shifted + 0.9).unwrap();
            assert!(hpd.length() <= hi - lo + 1e-6, "{p}: {} > {}", hpd.length(), hi - lo);
        }
    }
}

#[test]
fn beta_hpd_scales_with_second_coordinate() {
    let p = OriginalParams::new(0.0, 0.0, 1.0, 1.5, 0.4).unwrap();
    let data = sample(&p, 25, 11);
    let base = hpd_beta(&sufficient_stats(&data.pairs).unwrap(), 0.95).unwrap();
    for c in [0.1, 3.0, 250.0] {
        let scaled: Vec<(f64, f64)> = data.pairs.iter().map(|&(a, b)| (a, c * b)).collect();
        let i = hpd_beta(&sufficient_stats(&scaled).unwrap(), 0.95).unwrap();
        assert!((i.lo - c * base.lo).abs() < 1e-10 * c && (i.hi - c * base.hi).abs() < 1e-10 * c);
    }
}
