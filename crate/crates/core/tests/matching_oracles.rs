//! The expanded residuals against nested finite differences of the printed
//! product forms, for a prior that satisfies none of the conditions.

use bvn_prior::matching::{MatchingCondition as C, PriorJet, PriorSpec};

// ln π = 0.3β − 0.2β² + 0.4 ln θ + θ/3 − 0.5η + 0.1βη
fn g(b: f64, t: f64, e: f64) -> f64 {
    0.3 * b - 0.2 * b * b + 0.4 * t.ln() + t / 3.0 - 0.5 * e + 0.1 * b * e
}

fn pi(b: f64, t: f64, e: f64) -> f64 {
    g(b, t, e).exp()
}

fn exact_jet(b: f64, t: f64, e: f64) -> PriorJet {
    let p = pi(b, t, e);
    let gb = 0.3 - 0.4 * b + 0.1 * e;
    let gt = 0.4 / t + 1.0 / 3.0;
    let ge = -0.5 + 0.1 * b;
    PriorJet {
        pi: p,
        d_beta: gb * p,
        d_theta: gt * p,
        d_eta: ge * p,
        d_beta2: (gb * gb - 0.4) * p,
        d_theta2: (gt * gt - 0.4 / (t * t)) * p,
        d_eta2: ge * ge * p,
    }
}

const H: f64 = 1e-3;

type F<'a> = &'a dyn Fn(f64, f64, f64) -> f64;

fn d(f: F, axis: usize, b: f64, t: f64, e: f64) -> f64 {
    let mut p = [b, t, e];
    let mut m = [b, t, e];
    p[axis] += H;
    m[axis] -= H;
    (f(p[0], p[1], p[2]) - f(m[0], m[1], m[2])) / (2.0 * H)
}

fn d2(f: F, axis: usize, b: f64, t: f64, e: f64) -> f64 {
    let mut p = [b, t, e];
    let mut m = [b, t, e];
    p[axis] += H;
    m[axis] -= H;
    (f(p[0], p[1], p[2]) - 2.0 * f(b, t, e) + f(m[0], m[1], m[2])) / (H * H)
}

const BETA: usize = 0;
const THETA: usize = 1;
const ETA: usize = 2;

fn literal(c: C, b: f64, t: f64, e: f64) -> f64 {
    let t_pi = |b, t: f64, e| t * pi(b, t, e);
    let e_pi = |b, t, e: f64| e * pi(b, t, e);
    let tt_pi = |b, t: f64, e| t * t * pi(b, t, e);
    let ee_pi = |b, t, e: f64| e * e * pi(b, t, e);
    let d_t_pi = |b, t, e| d(&pi, THETA, b, t, e);
    let d_e_pi = |b, t, e| d(&pi, ETA, b, t, e);
    match c {
        // ∂θ{(θη²)⁻¹η²θ²π} + ∂η{η⁻³η²η²π}
        C::DistFnA1Beta => {
            let a = |b, t: f64, e: f64| (1.0 / (t * e * e)) * e * e * t * t * pi(b, t, e);
            let z = |b, t, e: f64| e.powi(-3) * e * e * e * e * pi(b, t, e);
            d(&a, THETA, b, t, e) + d(&z, ETA, b, t, e)
        }
        // ∂β(η²{θ²E∂³β²θ + η²E∂³β²η}π)
        C::DistFnA2Beta => {
            let a = |b, t: f64, e: f64| e * e * (t * t / (t * e * e) + e * e * e.powi(-3)) * pi(b, t, e);
            d(&a, BETA, b, t, e)
        }
        C::DistFnTheta => {
            let a = |b, t: f64, e| t * t * d_t_pi(b, t, e);
            d2(&tt_pi, THETA, b, t, e) - 2.0 * d(&a, THETA, b, t, e) - 12.0 * d(&t_pi, THETA, b, t, e)
        }
        // ∂²η(η²π) − 2∂η(η²∂ηπ) − ∂θ{E∂³θη² η²θ²π} − ∂η{E∂³ηβ² η²η²π}
        C::DistFnEtaMain => {
            let a = |b, t, e: f64| e * e * d_e_pi(b, t, e);
            let z = |b, t: f64, e: f64| (1.0 / (t * e * e)) * e * e * t * t * pi(b, t, e);
            let w = |b, t, e: f64| e.powi(-3) * e.powi(4) * pi(b, t, e);
            d2(&ee_pi, ETA, b, t, e) - 2.0 * d(&a, ETA, b, t, e) - d(&z, THETA, b, t, e) - d(&w, ETA, b, t, e)
        }
        // ∂η(η⁴E∂³η³π)
        C::DistFnEtaAux => {
            let a = |b, t, e: f64| e.powi(4) * 3.0 * e.powi(-3) * pi(b, t, e);
            d(&a, ETA, b, t, e)
        }
        C::HpdBeta => d(&t_pi, THETA, b, t, e) + d(&e_pi, ETA, b, t, e) - d2(&ee_pi, BETA, b, t, e),
        C::HpdTheta => -2.0 * d(&t_pi, THETA, b, t, e) - d2(&t_pi, THETA, b, t, e),
        C::HpdEta => d(&t_pi, THETA, b, t, e) + d(&e_pi, ETA, b, t, e) - d2(&ee_pi, ETA, b, t, e),
        C::LrBeta => {
            let a = |b, t, e| d(&pi, BETA, b, t, e);
            d(&t_pi, THETA, b, t, e) + d(&e_pi, ETA, b, t, e) + e * e * d(&a, BETA, b, t, e)
        }
        C::LrTheta => {
            let a = |b, t: f64, e| t * t * d_t_pi(b, t, e) + 4.0 * t * pi(b, t, e);
            d(&a, THETA, b, t, e)
        }
        // ∂θ(θπ) + ∂η[η²∂ηπ − πη²(−2/η)]
        C::LrEta => {
            let a = |b, t, e: f64| e * e * d_e_pi(b, t, e) - pi(b, t, e) * e * e * (-2.0 / e);
            d(&t_pi, THETA, b, t, e) + d(&a, ETA, b, t, e)
        }
    }
}

#[test]
fn expanded_residuals_match_printed_forms() {
    let exact = PriorSpec::custom("generic", g).with_analytic(exact_jet);
    let fd = PriorSpec::custom("generic-fd", g);
    let points = [(-1.5, 0.6, 0.7), (0.0, 1.0, 1.0), (0.8, 2.5, 0.5), (1.9, 1.3, 2.8)];
    for c in C::ALL {
        for &(b, t, e) in &points {
            let want = literal(c, b, t, e);
            let ours = c.residual_at(&exact, b, t, e).unwrap();
            let tol = 1e-5 * (1.0 + want.abs());
            assert!((ours - want).abs() < tol, "{c} at ({b}, {t}, {e}): {ours} vs {want}");
            let ours_fd = c.residual_at(&fd, b, t, e).unwrap();
            assert!((ours_fd - want).abs() < tol, "{c} fd at ({b}, {t}, {e}): {ours_fd} vs {want}");
        }
    }
}

#[test]
fn generic_prior_is_far_from_matching() {
    let exact = PriorSpec::custom("generic", g).with_analytic(exact_jet);
    let nonzero = C::ALL
        .iter()
        .filter(|c| c.residual_at(&exact, 0.4, 1.1, 0.9).unwrap().abs() > 1e-2)
        .count();
    assert_eq!(nonzero, 11);
}
