//! Computations conditional on a fixed environment sequence.
//!
//! Each generation uses the linear-fractional offspring pgf
//! `f(s) = 1 - θ + θ² / (θ + ζ(1 - s))` with `X = ln ζ`. Survival
//! probabilities decay geometrically in `n`, so all compositions are carried
//! out on `ln u` with `u = 1 - f`, using
//! `1 - f(1 - u) = θζu / (θ + ζu)`; nothing underflows before `ln u` does.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env_model::{Measure, Model};
use crate::special::{log_add_exp, log_sum_exp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuenchedError {
    #[error("{what} = {value} outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid environment step theta = {theta}, x = {x}")]
    InvalidStep { theta: f64, x: f64 },
    #[error("step {index} has theta = {theta}; the closed form needs theta = 1")]
    NotGeometric { index: usize, theta: f64 },
    #[error("index {j} outside 0..={n}")]
    Index { j: usize, n: usize },
    #[error("environment csv: {0}")]
    Csv(String),
}

/// Raised by [`simulate_particles`] when the population outgrows the cap.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("population {population} exceeded the cap at generation {generation}")]
pub struct CapExceeded {
    pub generation: usize,
    pub population: f64,
}

/// One generation of the environment: `(θ, ζ)` stored as `(θ, ln ζ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    theta: f64,
    x: f64,
}

impl EnvStep {
    pub fn new(theta: f64, zeta: f64) -> Result<Self, QuenchedError> {
        if !(zeta > 0.0) {
            return Err(QuenchedError::InvalidStep { theta, x: zeta.ln() });
        }
        Self::from_log(theta, zeta.ln())
    }

    pub fn from_log(theta: f64, x: f64) -> Result<Self, QuenchedError> {
        if !(theta > 0.0 && theta <= 1.0) || !x.is_finite() {
            return Err(QuenchedError::InvalidStep { theta, x });
        }
        Ok(EnvStep { theta, x })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `X = ln ζ`.
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn zeta(&self) -> f64 {
        self.x.exp()
    }

    /// `ln(1 - f(1 - u))` given `ln u`.
    pub fn log_complement(&self, log_u: f64) -> f64 {
        let lt = self.theta.ln();
        let t = self.x + log_u;
        if t == f64::NEG_INFINITY {
            return t;
        }
        lt + t - log_add_exp(lt, t)
    }
}

/// The offspring pgf of one step.
pub fn pgf(step: &EnvStep, s: f64) -> Result<f64, QuenchedError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(QuenchedError::Domain { what: "s", value: s });
    }
    let (th, zu) = (step.theta, step.zeta() * (1.0 - s));
    Ok(1.0 - th * zu / (th + zu))
}

/// An environment sequence with its prefix sums `S_0 = 0, S_k = X_1 + ... + X_k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvPath {
    steps: Vec<EnvStep>,
    s: Vec<f64>,
}

impl EnvPath {
    pub fn new() -> Self {
        EnvPath { steps: Vec::new(), s: vec![0.0] }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut s = Vec::with_capacity(n + 1);
        s.push(0.0);
        EnvPath { steps: Vec::with_capacity(n), s }
    }

    pub fn from_steps(steps: impl IntoIterator<Item = EnvStep>) -> Self {
        let mut path = EnvPath::new();
        steps.into_iter().for_each(|st| path.push(st));
        path
    }

    /// Path with `θ ≡ 1` and the given log-means.
    pub fn geometric(xs: &[f64]) -> Self {
        Self::from_steps(xs.iter().map(|&x| EnvStep { theta: 1.0, x }))
    }

    pub fn push(&mut self, step: EnvStep) {
        let last = *self.s.last().expect("prefix sums start at S_0");
        self.s.push(last + step.x);
        self.steps.push(step);
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.s.truncate(1);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[EnvStep] {
        &self.steps
    }

    /// Prefix sums, length `n + 1`.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn s_n(&self) -> f64 {
        self.s[self.steps.len()]
    }

    /// Writes the columns `k, theta, zeta, x, s` for `k = 1..=n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), QuenchedError> {
        let mut w = csv::Writer::from_writer(out);
        for (i, st) in self.steps.iter().enumerate() {
            w.serialize(CsvRow { k: i + 1, theta: st.theta, zeta: st.zeta(), x: st.x, s: self.s[i + 1] })
                .map_err(|e| QuenchedError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| QuenchedError::Csv(e.to_string()))
    }

    /// Reads a path written by [`EnvPath::write_csv`]. The `x` column is
    /// authoritative; `zeta` and `s` are checked against it.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, QuenchedError> {
        let mut r = csv::Reader::from_reader(input);
        let mut path = EnvPath::new();
        for (i, row) in r.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| QuenchedError::Csv(e.to_string()))?;
            if row.k != i + 1 {
                return Err(QuenchedError::Csv(format!("row {} has k = {}", i + 1, row.k)));
            }
            let step = EnvStep::from_log(row.theta, row.x)?;
            if row.zeta.is_finite() && (row.zeta.ln() - row.x).abs() > 1e-9 * row.x.abs().max(1.0) {
                return Err(QuenchedError::Csv(format!("row {}: zeta and x disagree", row.k)));
            }
            path.push(step);
            if (path.s_n() - row.s).abs() > 1e-9 * row.s.abs().max(1.0) {
                return Err(QuenchedError::Csv(format!("row {}: prefix sum mismatch", row.k)));
            }
        }
        Ok(path)
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    k: usize,
    theta: f64,
    zeta: f64,
    x: f64,
    s: f64,
}

/// `ln(1 - f_1 ∘ ... ∘ f_n(s))` over the given steps.
pub fn log_survival_steps(steps: &[EnvStep], s: f64) -> f64 {
    let mut lu = (-s).ln_1p();
    for st in steps.iter().rev() {
        lu = st.log_complement(lu);
    }
    lu
}

/// `ln(1 - f_{0,n}(s))`.
pub fn log_survival_q(path: &EnvPath, s: f64) -> f64 {
    log_survival_steps(&path.steps, s)
}

/// Quenched survival `1 - f_{0,n}(s)`; at `s = 0` this is `P_e(Z_n > 0)`.
pub fn survival_q(path: &EnvPath, s: f64) -> f64 {
    log_survival_q(path, s).exp()
}

/// Closed form of `1 - f_{0,n}(0)` when every `θ = 1`:
/// `1 / Σ_{k=0}^{n} e^{-S_k}`.
pub fn lf_survival(path: &EnvPath) -> Result<f64, QuenchedError> {
    if let Some((index, st)) = path.steps.iter().enumerate().find(|(_, st)| st.theta != 1.0) {
        return Err(QuenchedError::NotGeometric { index: index + 1, theta: st.theta });
    }
    Ok((-log_sum_exp(path.s.iter().map(|s| -s))).exp())
}

/// `ln W_{n,j}` with `f_{n,j} = f_n ∘ ... ∘ f_{j+1}`.
pub fn log_w_ratio(path: &EnvPath, j: usize) -> Result<f64, QuenchedError> {
    let n = path.len();
    if j > n {
        return Err(QuenchedError::Index { j, n });
    }
    let mut lu = 0.0;
    for st in &path.steps[j..] {
        lu = st.log_complement(lu);
    }
    Ok(lu - (path.s[n] - path.s[j]))
}

/// `W_{n,j} = (1 - f_{n,j}(0)) e^{-(S_n - S_j)}`.
pub fn w_ratio(path: &EnvPath, j: usize) -> Result<f64, QuenchedError> {
    log_w_ratio(path, j).map(f64::exp)
}

/// Law of `θ`, drawn independently of `ζ`. It doubles as the law of the
/// limit parameter `θ*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theta_law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaLaw {
    PointMass { theta: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for ThetaLaw {
    fn default() -> Self {
        ThetaLaw::PointMass { theta: 1.0 }
    }
}

impl ThetaLaw {
    pub fn check(&self) -> Result<(), QuenchedError> {
        let ok = |t: f64| t > 0.0 && t <= 1.0;
        match *self {
            ThetaLaw::PointMass { theta } if ok(theta) => Ok(()),
            ThetaLaw::Uniform { low, high } if ok(low) && ok(high) && low < high => Ok(()),
            ThetaLaw::PointMass { theta } => Err(QuenchedError::Domain { what: "theta", value: theta }),
            ThetaLaw::Uniform { low, .. } => Err(QuenchedError::Domain { what: "theta range", value: low }),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThetaLaw::PointMass { theta } => theta,
            ThetaLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(*self, ThetaLaw::PointMass { theta } if theta == 1.0)
    }
}

/// A validated model of `X` together with the law of `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub model: Model,
    pub theta_law: ThetaLaw,
}

impl Environment {
    pub fn new(model: Model, theta_law: ThetaLaw) -> Result<Self, QuenchedError> {
        theta_law.check()?;
        Ok(Environment { model, theta_law })
    }

    /// `θ ≡ 1`.
    pub fn geometric(model: Model) -> Self {
        Environment { model, theta_law: ThetaLaw::default() }
    }

    pub fn step_with_x<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> EnvStep {
        EnvStep { theta: self.theta_law.sample(rng), x }
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, measure: Measure, rng: &mut R) -> EnvStep {
        let x = self.model.sample_x(measure, rng);
        self.step_with_x(x, rng)
    }

    /// Replaces the contents of `path` with `n` fresh steps.
    pub fn fill_path<R: Rng + ?Sized>(&self, path: &mut EnvPath, n: usize, measure: Measure, rng: &mut R) {
        path.clear();
        for _ in 0..n {
            let st = self.sample_step(measure, rng);
            path.push(st);
        }
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, measure: Measure, rng: &mut R) -> EnvPath {
        let mut p = EnvPath::with_capacity(n);
        self.fill_path(&mut p, n, measure, rng);
        p
    }
}

/// Settings of [`w_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WLimitOptions {
    /// Relative change over the probe window that counts as converged.
    pub tol: f64,
    pub window: usize,
    pub n_cap: usize,
    pub record_trace: bool,
}

impl Default for WLimitOptions {
    fn default() -> Self {
        WLimitOptions { tol: 1e-10, window: 50, n_cap: 10_000, record_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WLimit {
    pub value: f64,
    pub log_value: f64,
    pub steps: usize,
    pub converged: bool,
    /// `W_{n,0}` for `n = 0, 1, ...` when requested.
    pub trace: Vec<f64>,
}

/// One realization of the monotone limit `W = lim_n W_{n,0}` along a fresh
/// tilted path. Stops once `W` moved by less than `tol` (relative) over the
/// last `window` steps, or at `n_cap` with `converged = false`; the returned
/// value then over-estimates `W`.
pub fn w_limit<R: Rng + ?Sized>(env: &Environment, opts: WLimitOptions, rng: &mut R) -> WLimit {
    let window = opts.window.max(1);
    let mut history = vec![0.0; window + 1];
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(1.0);
    }
    let (mut lu, mut s) = (0.0, 0.0);
    let mut log_w = 0.0;
    for n in 1..=opts.n_cap {
        let st = env.sample_step(Measure::Tilted, rng);
        s += st.x;
        lu = st.log_complement(lu);
        log_w = lu - s;
        history[n % (window + 1)] = log_w;
        if opts.record_trace {
            trace.push(log_w.exp());
        }
        if n >= window {
            let earlier = history[(n - window) % (window + 1)];
            if (earlier - log_w).exp_m1() <= opts.tol {
                return WLimit { value: log_w.exp(), log_value: log_w, steps: n, converged: true, trace };
            }
        }
    }
    WLimit { value: log_w.exp(), log_value: log_w, steps: opts.n_cap, converged: false, trace }
}

/// The limit pgf `g(λ) = 1 - θ* + θ*² / (θ* + λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPgf {
    pub theta: f64,
}

impl LimitPgf {
    pub fn eval(&self, lambda: f64) -> f64 {
        let t = self.theta;
        1.0 - t * lambda / (t + lambda)
    }

    /// `ln(1 - g(e^{log_lambda}))`.
    pub fn log_complement(&self, log_lambda: f64) -> f64 {
        let lt = self.theta.ln();
        lt + log_lambda - log_add_exp(lt, log_lambda)
    }
}

/// Draws `θ*` from the environment's `θ` law and returns the matching `g`.
pub fn sample_g<R: Rng + ?Sized>(env: &Environment, rng: &mut R) -> LimitPgf {
    LimitPgf { theta: env.theta_law.sample(rng) }
}

// A Poisson mean beyond this is treated as an overflow of any admissible cap.
const POPULATION_HORIZON: f64 = 1e15;

/// Total offspring of `z` individuals under `step`.
///
/// Each individual has no children with probability `1 - θ` and otherwise a
/// Geometric number (failures before success, success probability
/// `θ / (θ + ζ)`); the sum over `k` such individuals is negative binomial,
/// drawn as a Gamma-mixed Poisson.
fn offspring<R: Rng + ?Sized>(step: &EnvStep, z: u64, rng: &mut R) -> Option<f64> {
    let k = if step.theta == 1.0 {
        z
    } else {
        Binomial::new(z, step.theta).expect("valid binomial").sample(rng)
    };
    if k == 0 {
        return Some(0.0);
    }
    let scale = (step.x - step.theta.ln()).exp();
    if !scale.is_finite() {
        return None;
    }
    let mean = Gamma::new(k as f64, scale).expect("valid gamma").sample(rng);
    if mean > POPULATION_HORIZON {
        return Some(mean);
    }
    if mean <= 0.0 {
        return Some(0.0);
    }
    Some(Poisson::new(mean).expect("valid poisson").sample(rng).round())
}

/// Forward simulation of the population along `path` from `z0` ancestors.
/// Returns `Z_n`, or [`CapExceeded`] as soon as a generation exceeds `cap`.
pub fn simulate_particles<R: Rng + ?Sized>(
    path: &EnvPath,
    z0: u64,
    cap: u64,
    rng: &mut R,
) -> Result<u64, CapExceeded> {
    assert!(z0 >= 1, "simulate_particles needs z0 >= 1");
    let mut z = z0;
    for (i, st) in path.steps.iter().enumerate() {
        if z == 0 {
            return Ok(0);
        }
        match offspring(st, z, rng) {
            Some(next) if next <= cap as f64 => z = next as u64,
            Some(next) => return Err(CapExceeded { generation: i + 1, population: next }),
            None => return Err(CapExceeded { generation: i + 1, population: f64::INFINITY }),
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pgf_reference_values() {
        let s11 = EnvStep::new(1.0, 1.0).unwrap();
        assert_relative_eq!(pgf(&s11, 0.0).unwrap(), 0.5);
        assert_eq!(pgf(&s11, 1.0).unwrap(), 1.0);
        let s12 = EnvStep::new(1.0, 2.0).unwrap();
        assert_relative_eq!(pgf(&s12, 0.0).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert!(pgf(&s12, 1.5).is_err());
    }

    #[test]
    fn complement_matches_pgf() {
        let st = EnvStep::new(0.4, 3.0).unwrap();
        for &s in &[0.0, 0.2, 0.9] {
            let direct = 1.0 - pgf(&st, s).unwrap();
            assert_relative_eq!(st.log_complement((1.0 - s).ln()).exp(), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn empty_path_survival() {
        let p = EnvPath::new();
        assert_eq!(survival_q(&p, 0.0), 1.0);
        assert_relative_eq!(survival_q(&p, 0.3), 0.7);
    }

    #[test]
    fn invalid_steps_rejected() {
        assert!(EnvStep::new(0.0, 1.0).is_err());
        assert!(EnvStep::new(1.2, 1.0).is_err());
        assert!(EnvStep::new(1.0, 0.0).is_err());
    }

    #[test]
    fn limit_pgf_values() {
        assert_relative_eq!(LimitPgf { theta: 1.0 }.eval(1.0), 0.5);
        assert_relative_eq!(LimitPgf { theta: 0.5 }.eval(1.0), 2.0 / 3.0);
        assert_eq!(LimitPgf { theta: 0.3 }.eval(0.0), 1.0);
        let g = LimitPgf { theta: 0.7 };
        assert_relative_eq!(g.log_complement(0.4f64.ln()).exp(), 1.0 - g.eval(0.4), max_relative = 1e-13);
    }
}
