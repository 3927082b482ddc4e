//! Globally adaptive Gauss-Kronrod (7, 15) quadrature.
//!
//! Semi-infinite ranges `[a, inf)` are mapped onto `[0, 1)` with
//! `x = a + u / (1 - u)`, `dx = du / (1 - u)^2`. The Kronrod nodes never touch
//! `u = 1`, and an integrand decaying faster than `x^-2` stays bounded after the
//! map. `(-inf, b]` is reflected onto `[0, inf)` and a doubly infinite range is
//! split at zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_segments: 4000,
        }
    }
}

/// Integrate `f` over `[lo, hi]` to absolute tolerance `tol`. Either limit may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<QuadratureResult> {
    integrate_with(
        f,
        lo,
        hi,
        QuadOptions {
            abs_tol: tol,
            ..QuadOptions::default()
        },
    )
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    opts: QuadOptions,
) -> Result<QuadratureResult> {
    integrate_dyn(&f, lo, hi, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, opts: QuadOptions) -> Result<QuadratureResult> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::domain("integration limit is NaN"));
    }
    if lo == hi {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if lo > hi {
        let r = integrate_dyn(f, hi, lo, opts)?;
        return Ok(QuadratureResult { value: -r.value, ..r });
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(f, lo, hi, opts),
        (true, false) => adaptive(&|u: f64| upper_tail(f, lo, u), 0.0, 1.0, opts),
        (false, true) => adaptive(&|u: f64| upper_tail(&|t: f64| f(-t), -hi, u), 0.0, 1.0, opts),
        (false, false) => {
            let half = QuadOptions {
                abs_tol: 0.5 * opts.abs_tol,
                ..opts
            };
            let right = integrate_dyn(f, 0.0, f64::INFINITY, half)?;
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, half)?;
            Ok(QuadratureResult {
                value: left.value + right.value,
                abs_error_estimate: left.abs_error_estimate + right.abs_error_estimate,
                evaluations: left.evaluations + right.evaluations,
            })
        }
    }
}

fn upper_tail<F: Fn(f64) -> f64 + ?Sized>(f: &F, lo: f64, u: f64) -> f64 {
    let one_minus = 1.0 - u;
    let x = lo + u / one_minus;
    let fx = f(x);
    if fx == 0.0 {
        0.0
    } else {
        fx / (one_minus * one_minus)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn adaptive<F: Fn(f64) -> f64 + ?Sized>(f: &F, lo: f64, hi: f64, opts: QuadOptions) -> Result<QuadratureResult> {
    let first = kronrod15(f, lo, hi);
    let mut evaluations = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    loop {
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            break;
        }
        if !value.is_finite() || heap.len() >= opts.max_segments {
            return Err(Error::NoConvergence {
                method: "gauss-kronrod",
                best: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Segment can no longer be split in floating point.
            return Err(Error::NoConvergence {
                method: "gauss-kronrod",
                best: value,
                error,
            });
        }
        let left = kronrod15(f, worst.lo, mid);
        let right = kronrod15(f, mid, worst.hi);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift from incremental updates.
    let (value, error) = heap
        .into_sorted_vec()
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadratureResult {
        value,
        abs_error_estimate: error,
        evaluations,
    })
}

fn kronrod15<F: Fn(f64) -> f64 + ?Sized>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = kronrod.abs();
    let mut values = [(0.0, 0.0); 7];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        values[j] = (f1, f2);
        kronrod += w * (f1 + f2);
        abs_sum += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }

    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { lo, hi, value, error }
}
