//! The law of the environment log-mean `X`, its exponential tilt and the
//! deterministic moment functionals.
//!
//! Under the original measure `X` has density
//!
//! ```text
//! p(x) = q λ e^{λx}                  x < 0
//!        w K x^{-β-1} e^{-ρx}        x ≥ x0
//! ```
//!
//! with `w = 1 - q` and `K` normalizing the tail piece. Tilting by
//! `e^{ρx} / m`, `m = φ(ρ)`, turns the negative part into `-Exp(λ + ρ)` and
//! the tail into a pure Pareto`(β, x0)` law, so every functional used by the
//! estimators has a closed form. [`validate`] recomputes each of them by
//! adaptive quadrature and rejects the parameters if the two routes differ.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{integrate_semi_infinite, upper_gamma, Tolerance};

/// Relative agreement required between closed forms and quadrature.
pub const CROSS_CHECK_TOL: f64 = 1e-8;

/// Parameters of the two-component law of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub q_neg: f64,
    pub lambda_neg: f64,
    pub beta: f64,
    pub rho: f64,
    pub x0: f64,
}

impl ModelParams {
    /// The default model: a drift large enough that the one-big-jump regime
    /// is reached at horizons of a few dozen generations.
    pub const fn desk_scale() -> Self {
        ModelParams { q_neg: 0.99, lambda_neg: 0.2, beta: 2.5, rho: 0.1, x0: 0.5 }
    }

    /// A mildly tilted model (`a ≈ 0.37`). Its asymptotic regime sets in only
    /// at horizons in the thousands.
    pub const fn mild_drift() -> Self {
        ModelParams { q_neg: 0.95, lambda_neg: 1.0, beta: 3.0, rho: 0.5, x0: 1.0 }
    }

    pub fn w_tail(&self) -> f64 {
        1.0 - self.q_neg
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::desk_scale()
    }
}

/// Which law increments are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Original,
    #[default]
    Tilted,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("tail exponent beta = {beta} must exceed 2")]
    NonintegrableTail { beta: f64 },
    #[error("parameter {name} = {value} {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("E[X] = {mean} is not negative")]
    NotSubcritical { mean: f64 },
    #[error("phi'(rho) = {dphi} is not negative")]
    NotStronglyTilted { dphi: f64 },
    #[error("{quantity}: closed form {closed} and quadrature {quadrature} disagree")]
    QuadratureMismatch { quantity: &'static str, closed: f64, quadrature: f64 },
    #[error("{what} argument {value} outside [{lo}, {hi}]")]
    Domain { what: &'static str, value: f64, lo: f64, hi: f64 },
}

/// Derived functionals of a validated model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    /// `φ(ρ)`.
    pub m: f64,
    /// Drift magnitude of the tilted walk, `-φ'(ρ)/φ(ρ)`.
    pub a: f64,
    /// `-E[X]` under the original measure.
    pub b: f64,
    pub var_x_orig: f64,
    pub var_x_tilted: f64,
    pub k_tail: f64,
    pub dphi_rho: f64,
    /// Probability of the negative component under the tilted measure.
    pub tilted_neg_weight: f64,
    /// Probability of the Pareto component under the tilted measure.
    pub tilted_tail_weight: f64,
}

/// `∫_{x0}^∞ x^{-p} e^{-s x} dx` for `s ≥ 0`.
fn tail_integral(p: f64, s: f64, x0: f64) -> f64 {
    if s == 0.0 {
        x0.powf(1.0 - p) / (p - 1.0)
    } else {
        s.powf(p - 1.0) * upper_gamma(1.0 - p, s * x0)
    }
}

fn closed_form_moments(p: &ModelParams) -> MomentTable {
    let (q, lam, beta, rho, x0) = (p.q_neg, p.lambda_neg, p.beta, p.rho, p.x0);
    let w = p.w_tail();
    let k = 1.0 / tail_integral(beta + 1.0, rho, x0);
    let mean = -q / lam + w * k * tail_integral(beta, rho, x0);
    let second = 2.0 * q / (lam * lam) + w * k * tail_integral(beta - 1.0, rho, x0);
    let neg_mass = q * lam / (lam + rho);
    let tail_mass = w * k * x0.powf(-beta) / beta;
    let m = neg_mass + tail_mass;
    let dphi = -q * lam / (lam + rho).powi(2) + w * k * x0.powf(1.0 - beta) / (beta - 1.0);
    let wn = neg_mass / m;
    let wt = tail_mass / m;
    let a = -dphi / m;
    let second_tilted = wn * 2.0 / (lam + rho).powi(2) + wt * beta * x0 * x0 / (beta - 2.0);
    MomentTable {
        m,
        a,
        b: -mean,
        var_x_orig: second - mean * mean,
        var_x_tilted: second_tilted - a * a,
        k_tail: k,
        dphi_rho: dphi,
        tilted_neg_weight: wn,
        tilted_tail_weight: wt,
    }
}

fn quad_tol() -> Tolerance {
    Tolerance { abs: 1e-300, rel: 1e-12 }
}

/// `∫ h(x) e^{tx} p(x) dx` under the original measure, by quadrature only.
fn quad_original<F: Fn(f64) -> f64>(p: &ModelParams, k_tail: f64, t: f64, h: F) -> f64 {
    let (q, lam, beta, rho, x0) = (p.q_neg, p.lambda_neg, p.beta, p.rho, p.x0);
    let w = p.w_tail();
    let neg = integrate_semi_infinite(
        |x| h(x) * q * lam * ((lam + t) * x).exp(),
        0.0,
        false,
        1.0 / (lam + t),
        quad_tol(),
    );
    let tail = integrate_semi_infinite(
        |x: f64| h(x) * w * k_tail * x.powf(-beta - 1.0) * ((t - rho) * x).exp(),
        x0,
        true,
        x0,
        quad_tol(),
    );
    neg.value + tail.value
}

fn quadrature_moments(p: &ModelParams) -> MomentTable {
    let (beta, rho, x0) = (p.beta, p.rho, p.x0);
    let k = 1.0
        / integrate_semi_infinite(|x: f64| x.powf(-beta - 1.0) * (-rho * x).exp(), x0, true, x0, quad_tol())
            .value;
    let mean = quad_original(p, k, 0.0, |x| x);
    let second = quad_original(p, k, 0.0, |x| x * x);
    let m = quad_original(p, k, rho, |_| 1.0);
    let dphi = quad_original(p, k, rho, |x| x);
    let tilted_second = quad_original(p, k, rho, |x| x * x) / m;
    let tilted_tail = quad_original(p, k, rho, |x| if x > 0.0 { 1.0 } else { 0.0 }) / m;
    let a = -dphi / m;
    MomentTable {
        m,
        a,
        b: -mean,
        var_x_orig: second - mean * mean,
        var_x_tilted: tilted_second - a * a,
        k_tail: k,
        dphi_rho: dphi,
        tilted_neg_weight: 1.0 - tilted_tail,
        tilted_tail_weight: tilted_tail,
    }
}

fn check_fields(p: &ModelParams) -> Result<(), ModelError> {
    let invalid = |name, value, reason| Err(ModelError::InvalidParameter { name, value, reason });
    if !(p.beta > 2.0) {
        return Err(ModelError::NonintegrableTail { beta: p.beta });
    }
    if !(p.q_neg > 0.0 && p.q_neg < 1.0) {
        return invalid("q_neg", p.q_neg, "must lie in (0, 1)");
    }
    if !(p.lambda_neg > 0.0 && p.lambda_neg.is_finite()) {
        return invalid("lambda_neg", p.lambda_neg, "must be positive");
    }
    if !(p.rho > 0.0 && p.rho < 1.0) {
        return invalid("rho", p.rho, "must lie in (0, 1)");
    }
    if !(p.x0 > 0.0 && p.x0.is_finite()) {
        return invalid("x0", p.x0, "must be positive");
    }
    Ok(())
}

fn cross_check(quantity: &'static str, closed: f64, quadrature: f64) -> Result<(), ModelError> {
    let scale = closed.abs().max(quadrature.abs()).max(1e-300);
    if (closed - quadrature).abs() <= CROSS_CHECK_TOL * scale {
        Ok(())
    } else {
        Err(ModelError::QuadratureMismatch { quantity, closed, quadrature })
    }
}

/// Validates the parameters and returns a model handle carrying the moment
/// table.
///
/// The sign of `φ'(ρ)` is checked before the sign of `E[X]`. Since `φ` is
/// convex with `φ(0) = 1`, a negative `φ'(ρ)` forces `E[X] = φ'(0) < 0`.
pub fn validate(params: ModelParams) -> Result<Model, ModelError> {
    check_fields(&params)?;
    let closed = closed_form_moments(&params);
    if !(closed.dphi_rho < 0.0) {
        return Err(ModelError::NotStronglyTilted { dphi: closed.dphi_rho });
    }
    if !(closed.b > 0.0) {
        return Err(ModelError::NotSubcritical { mean: -closed.b });
    }
    let quad = quadrature_moments(&params);
    cross_check("k_tail", closed.k_tail, quad.k_tail)?;
    cross_check("m", closed.m, quad.m)?;
    cross_check("dphi_rho", closed.dphi_rho, quad.dphi_rho)?;
    cross_check("a", closed.a, quad.a)?;
    cross_check("b", closed.b, quad.b)?;
    cross_check("var_x_orig", closed.var_x_orig, quad.var_x_orig)?;
    cross_check("var_x_tilted", closed.var_x_tilted, quad.var_x_tilted)?;
    cross_check("tilted_tail_weight", closed.tilted_tail_weight, quad.tilted_tail_weight)?;
    Ok(Model { params, moments: closed })
}

/// A validated environment law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    params: ModelParams,
    moments: MomentTable,
}

impl Model {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn moments(&self) -> &MomentTable {
        &self.moments
    }

    pub fn m(&self) -> f64 {
        self.moments.m
    }

    pub fn a(&self) -> f64 {
        self.moments.a
    }

    fn check_t(&self, t: f64) -> Result<(), ModelError> {
        if (0.0..=self.params.rho).contains(&t) {
            Ok(())
        } else {
            Err(ModelError::Domain { what: "phi", value: t, lo: 0.0, hi: self.params.rho })
        }
    }

    /// `φ(t) = E[e^{tX}]` for `t ∈ [0, ρ]`.
    pub fn phi(&self, t: f64) -> Result<f64, ModelError> {
        self.check_t(t)?;
        let p = &self.params;
        Ok(p.q_neg * p.lambda_neg / (p.lambda_neg + t)
            + p.w_tail() * self.moments.k_tail * tail_integral(p.beta + 1.0, p.rho - t, p.x0))
    }

    /// `φ'(t) = E[X e^{tX}]` for `t ∈ [0, ρ]`.
    pub fn dphi(&self, t: f64) -> Result<f64, ModelError> {
        self.check_t(t)?;
        let p = &self.params;
        Ok(-p.q_neg * p.lambda_neg / (p.lambda_neg + t).powi(2)
            + p.w_tail() * self.moments.k_tail * tail_integral(p.beta, p.rho - t, p.x0))
    }

    /// `φ(t)` by quadrature of the density, independent of the closed form.
    pub fn phi_quadrature(&self, t: f64) -> f64 {
        quad_original(&self.params, self.moments.k_tail, t, |_| 1.0)
    }

    /// `φ'(t)` by quadrature.
    pub fn dphi_quadrature(&self, t: f64) -> f64 {
        quad_original(&self.params, self.moments.k_tail, t, |x| x)
    }

    /// Density of `X` under `measure`.
    pub fn density(&self, x: f64, measure: Measure) -> f64 {
        let p = &self.params;
        match measure {
            Measure::Original => {
                if x < 0.0 {
                    p.q_neg * p.lambda_neg * (p.lambda_neg * x).exp()
                } else if x >= p.x0 {
                    p.w_tail() * self.moments.k_tail * x.powf(-p.beta - 1.0) * (-p.rho * x).exp()
                } else {
                    0.0
                }
            }
            Measure::Tilted => {
                let r = p.lambda_neg + p.rho;
                if x < 0.0 {
                    self.moments.tilted_neg_weight * r * (r * x).exp()
                } else if x >= p.x0 {
                    self.moments.tilted_tail_weight * p.beta * p.x0.powf(p.beta) * x.powf(-p.beta - 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Total mass of the density under `measure`, by quadrature.
    pub fn density_mass(&self, measure: Measure) -> f64 {
        let tol = Tolerance { abs: 1e-300, rel: 1e-12 };
        let neg = integrate_semi_infinite(|x| self.density(x, measure), 0.0, false, 1.0, tol);
        let tail = integrate_semi_infinite(|x| self.density(x, measure), self.params.x0, true, self.params.x0, tol);
        neg.value + tail.value
    }

    /// One draw of `X`.
    pub fn sample_x<R: Rng + ?Sized>(&self, measure: Measure, rng: &mut R) -> f64 {
        let p = &self.params;
        match measure {
            Measure::Original => {
                if rng.random::<f64>() < p.q_neg {
                    let e: f64 = rng.sample(Exp1);
                    -e / p.lambda_neg
                } else {
                    loop {
                        let x = self.pareto_above(p.x0, rng);
                        if rng.random::<f64>() < (-p.rho * (x - p.x0)).exp() {
                            return x;
                        }
                    }
                }
            }
            Measure::Tilted => {
                if rng.random::<f64>() < self.moments.tilted_neg_weight {
                    let e: f64 = rng.sample(Exp1);
                    -e / (p.lambda_neg + p.rho)
                } else {
                    self.pareto_above(p.x0, rng)
                }
            }
        }
    }

    /// A Pareto`(β, c)` draw, which is the tilted law conditioned on
    /// `X ≥ c` whenever `c ≥ x0`.
    pub fn pareto_above<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        c * u.powf(-1.0 / self.params.beta)
    }

    /// Tilted tail `A(x) = P(X > x)` for `x ≥ x0`.
    pub fn tail_a(&self, x: f64) -> Result<f64, ModelError> {
        let p = &self.params;
        if !(x >= p.x0) {
            return Err(ModelError::Domain { what: "tail_a", value: x, lo: p.x0, hi: f64::INFINITY });
        }
        Ok(self.moments.tilted_tail_weight * (p.x0 / x).powf(p.beta))
    }

    /// `A(x)` by quadrature of the tilted density.
    pub fn tail_a_quadrature(&self, x: f64) -> f64 {
        integrate_semi_infinite(
            |y| self.density(y, Measure::Tilted),
            x,
            true,
            x,
            Tolerance { abs: 1e-300, rel: 1e-12 },
        )
        .value
    }

    /// `b_n = β A(an) / (an)`.
    pub fn b_n(&self, n: usize) -> Result<f64, ModelError> {
        let x = self.moments.a * n as f64;
        if n == 0 || x < self.params.x0 {
            return Err(ModelError::Domain {
                what: "b_n (a*n)",
                value: x,
                lo: self.params.x0,
                hi: f64::INFINITY,
            });
        }
        Ok(self.params.beta * self.tail_a(x)? / x)
    }

    /// Smallest horizon for which `b_n` is defined.
    pub fn min_horizon(&self) -> usize {
        ((self.params.x0 / self.moments.a).ceil() as usize).max(1)
    }
}
