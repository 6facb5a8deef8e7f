//! Adaptive Gauss–Kronrod quadrature and the upper incomplete gamma
//! function for arbitrary real order.
//!
//! The quadrature routines are the independent route used to check every
//! closed-form moment of the environment law, so they deliberately share no
//! code with the closed forms in [`crate::env_model`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default absolute tolerance of [`integrate`].
pub const ABS_TOL: f64 = 1e-12;
/// Default relative tolerance of [`integrate`].
pub const REL_TOL: f64 = 1e-10;
/// A semi-infinite integral is truncated once a piece contributes less than
/// this fraction of the running total.
pub const TAIL_CUTOFF: f64 = 1e-16;

const MAX_SUBDIVISIONS: usize = 2_000;
const MAX_PIECES: usize = 400;

// 15-point Kronrod abscissae (positive half, descending) and weights; the
// odd-indexed abscissae are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of a numerical integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: ABS_TOL, rel: REL_TOL }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[i] = f1;
        fv2[i] = f2;
        kronrod += WGK[i] * (f1 + f2);
        res_abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        res_asc += WGK[i] * ((fv1[i] - mean).abs() + (fv2[i] - mean).abs());
    }
    let result = kronrod * half;
    res_asc *= half.abs();
    res_abs *= half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive 15-point Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true };
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    let mut evaluations = 15;
    let mut converged = false;
    for _ in 0..MAX_SUBDIVISIONS {
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            converged = true;
            break;
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Interval { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Interval { a: mid, b: worst.b, value: v2, err: e2 });
    }
    // resum to shed the drift of the running updates
    let (value, abs_error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), iv| (v + iv.value, e + iv.err));
    if !converged {
        converged = abs_error <= tol.abs.max(tol.rel * value.abs());
    }
    Quadrature { value, abs_error, evaluations, converged }
}

/// Integrates `f` over `[a, +inf)` (`upward = true`) or `(-inf, a]` by
/// summing pieces of doubling width `scale, 2 scale, 4 scale, ...` until a
/// piece falls below [`TAIL_CUTOFF`] of the running total.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    upward: bool,
    scale: f64,
    tol: Tolerance,
) -> Quadrature {
    integrate_pieces(&f, a, upward, scale, tol, TAIL_CUTOFF)
}

pub(crate) fn integrate_pieces<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    upward: bool,
    scale: f64,
    tol: Tolerance,
    cutoff: f64,
) -> Quadrature {
    let dir = if upward { 1.0 } else { -1.0 };
    let mut lo = a;
    let mut width = scale;
    let mut out = Quadrature { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true };
    let mut quiet = 0;
    for _ in 0..MAX_PIECES {
        let hi = lo + dir * width;
        let (x0, x1) = if upward { (lo, hi) } else { (hi, lo) };
        let piece = integrate(f, x0, x1, tol);
        out.value += piece.value;
        out.abs_error += piece.abs_error;
        out.evaluations += piece.evaluations;
        out.converged &= piece.converged;
        if piece.value.abs() <= cutoff * out.value.abs() {
            quiet += 1;
            // two consecutive negligible pieces guard against a piece that
            // straddles a zero of the integrand
            if quiet >= 2 {
                return out;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    out.converged = false;
    out
}

/// Exponential integral `E1(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0");
    if x < 1.0 {
        const EULER: f64 = 0.577_215_664_901_532_860_606_512_090_082;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER - x.ln() - sum
    } else {
        upper_gamma_cf(0.0, x)
    }
}

// Lentz evaluation of the continued fraction for Γ(a, x); converges for
// every real a once x is not small.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * x.ln() - x).exp() * h
}

/// Upper incomplete gamma function `Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt` for
/// any real `a` and `x > 0`.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper_gamma requires x > 0");
    if a > 0.0 {
        return statrs::function::gamma::gamma_ur(a, x) * statrs::function::gamma::gamma(a);
    }
    if x >= 1.0 {
        return upper_gamma_cf(a, x);
    }
    // Downward recurrence Γ(b-1, x) = (Γ(b, x) - x^{b-1} e^{-x}) / (b-1)
    // from a base order in [0, 1); no cancellation for x < 1.
    let steps = (-a).ceil();
    let mut b = a + steps;
    if b >= 1.0 - 1e-12 {
        b -= 1.0;
    }
    let steps = (b - a).round() as usize;
    let mut value = if b.abs() < 1e-12 {
        b = 0.0;
        exp_integral_e1(x)
    } else {
        statrs::function::gamma::gamma_ur(b, x) * statrs::function::gamma::gamma(b)
    };
    for _ in 0..steps {
        let lower = b - 1.0;
        value = (value - (lower * x.ln() - x).exp()) / lower;
        b = lower;
    }
    value
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`; returns `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, log_add_exp)
}
