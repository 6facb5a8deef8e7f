//! Defensive-mixture big-jump proposals for tilted environment paths.
//!
//! With probability `1 - w` a path is drawn from the nominal tilted law.
//! With probability `w`, one index `j` (or a pair of indices) is drawn from
//! an index law and the corresponding increments are drawn from the tilted
//! law conditioned on `X ≥ c`, `c = max(δan, x0)`; all other increments are
//! nominal. The likelihood ratio of nominal to proposal is
//!
//! ```text
//! 1 / ((1 - w) + w Σ_j π_j 1{X_j ≥ c} / A(c))
//! ```
//!
//! and never exceeds `1 / (1 - w)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env_model::{Measure, Model};
use crate::quenched::{EnvPath, Environment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ISConfigError {
    #[error("mixture weight {0} must lie in (0, 1)")]
    MixtureWeight(f64),
    #[error("jump threshold delta {0} must lie in (0, 1)")]
    Delta(f64),
    #[error("geometric index parameter {0} must lie in (0, 1]")]
    GeometricP(f64),
    #[error("fixed jump index {index} outside 1..={n}")]
    FixedIndex { index: usize, n: usize },
    #[error("forced jump count {0} must be 1 or 2")]
    ForcedJumps(usize),
    #[error("a two-jump proposal needs at least two indices with positive probability")]
    PairImpossible,
}

/// Law of the index that receives the forced big jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpIndexLaw {
    Uniform,
    /// `π_j ∝ (1 - p)^{j - 1}`.
    Geometric { p: f64 },
    /// `π_j ∝ (1 - p)^{n - j}`.
    GeometricFromEnd { p: f64 },
    Fixed { index: usize },
}

impl JumpIndexLaw {
    /// Index law reflected in time, `j ↦ n + 1 - j`.
    pub fn reversed(self, n: usize) -> Self {
        match self {
            JumpIndexLaw::Uniform => JumpIndexLaw::Uniform,
            JumpIndexLaw::Geometric { p } => JumpIndexLaw::GeometricFromEnd { p },
            JumpIndexLaw::GeometricFromEnd { p } => JumpIndexLaw::Geometric { p },
            JumpIndexLaw::Fixed { index } => JumpIndexLaw::Fixed { index: n + 1 - index.min(n) },
        }
    }

    /// Probabilities `π_1..π_n`.
    pub fn probabilities(&self, n: usize) -> Result<Vec<f64>, ISConfigError> {
        let raw: Vec<f64> = match *self {
            JumpIndexLaw::Uniform => vec![1.0; n],
            JumpIndexLaw::Geometric { p } | JumpIndexLaw::GeometricFromEnd { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(ISConfigError::GeometricP(p));
                }
                let mut v: Vec<f64> = (0..n).map(|k| (1.0 - p).powi(k as i32)).collect();
                if matches!(self, JumpIndexLaw::GeometricFromEnd { .. }) {
                    v.reverse();
                }
                v
            }
            JumpIndexLaw::Fixed { index } => {
                if index == 0 || index > n {
                    return Err(ISConfigError::FixedIndex { index, n });
                }
                (1..=n).map(|j| if j == index { 1.0 } else { 0.0 }).collect()
            }
        };
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|v| v / total).collect())
    }
}

/// Settings of the defensive big-jump mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ISConfig {
    pub mixture_weight: f64,
    pub jump_index_law: JumpIndexLaw,
    pub jump_threshold_delta: f64,
    /// Number of indices forced above the threshold in the big-jump
    /// component, 1 or 2.
    pub forced_jumps: usize,
}

impl Default for ISConfig {
    fn default() -> Self {
        ISConfig {
            mixture_weight: 0.5,
            jump_index_law: JumpIndexLaw::Geometric { p: 0.5 },
            jump_threshold_delta: 0.5,
            forced_jumps: 1,
        }
    }
}

impl ISConfig {
    pub fn with_law(mut self, law: JumpIndexLaw) -> Self {
        self.jump_index_law = law;
        self
    }

    pub fn check(&self) -> Result<(), ISConfigError> {
        if !(self.mixture_weight > 0.0 && self.mixture_weight < 1.0) {
            return Err(ISConfigError::MixtureWeight(self.mixture_weight));
        }
        if !(self.jump_threshold_delta > 0.0 && self.jump_threshold_delta < 1.0) {
            return Err(ISConfigError::Delta(self.jump_threshold_delta));
        }
        if !(1..=2).contains(&self.forced_jumps) {
            return Err(ISConfigError::ForcedJumps(self.forced_jumps));
        }
        Ok(())
    }
}

/// A prepared proposal for paths of a fixed length.
#[derive(Debug, Clone)]
pub struct BigJumpProposal {
    n: usize,
    threshold: f64,
    inv_tail: f64,
    w: f64,
    jumps: usize,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BigJumpProposal {
    pub fn new(model: &Model, n: usize, cfg: &ISConfig) -> Result<Self, ISConfigError> {
        cfg.check()?;
        let probs = cfg.jump_index_law.probabilities(n)?;
        if cfg.forced_jumps == 2 && probs.iter().filter(|&&p| p > 0.0).count() < 2 {
            return Err(ISConfigError::PairImpossible);
        }
        let threshold = (cfg.jump_threshold_delta * model.a() * n as f64).max(model.params().x0);
        let tail = model.tail_a(threshold).expect("threshold is at least x0");
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(BigJumpProposal {
            n,
            threshold,
            inv_tail: 1.0 / tail,
            w: cfg.mixture_weight,
            jumps: cfg.forced_jumps,
            probs,
            cumulative,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Upper bound of every likelihood ratio.
    pub fn weight_bound(&self) -> f64 {
        1.0 / (1.0 - self.w)
    }

    fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.n - 1];
        self.cumulative.partition_point(|&c| c <= u).min(self.n - 1)
    }

    /// Likelihood ratio nominal/proposal of a path with increments `xs`.
    pub fn weight(&self, xs: impl Iterator<Item = f64>) -> f64 {
        let big: Vec<usize> = xs
            .enumerate()
            .filter(|(_, x)| *x >= self.threshold)
            .map(|(i, _)| i)
            .collect();
        let density_ratio = if self.jumps == 1 {
            big.iter().map(|&i| self.probs[i]).sum::<f64>() * self.inv_tail
        } else {
            let mut s = 0.0;
            for (a, &i) in big.iter().enumerate() {
                for &j in &big[a + 1..] {
                    let (pi, pj) = (self.probs[i], self.probs[j]);
                    if pi > 0.0 && pj > 0.0 {
                        s += pi * pj * (1.0 / (1.0 - pi) + 1.0 / (1.0 - pj));
                    }
                }
            }
            s * self.inv_tail * self.inv_tail
        };
        1.0 / ((1.0 - self.w) + self.w * density_ratio)
    }

    /// Increments of one proposal path written into `xs`; returns the
    /// likelihood ratio.
    pub fn sample_increments<R: Rng + ?Sized>(&self, model: &Model, xs: &mut Vec<f64>, rng: &mut R) -> f64 {
        xs.clear();
        let mut forced = [usize::MAX; 2];
        if rng.random::<f64>() < self.w {
            forced[0] = self.draw_index(rng);
            if self.jumps == 2 {
                loop {
                    let j = self.draw_index(rng);
                    if j != forced[0] {
                        forced[1] = j;
                        break;
                    }
                }
            }
        }
        for k in 0..self.n {
            let x = if forced.contains(&k) {
                model.pareto_above(self.threshold, rng)
            } else {
                model.sample_x(Measure::Tilted, rng)
            };
            xs.push(x);
        }
        self.weight(xs.iter().copied())
    }
}

/// Draws tilted environment paths, optionally through a big-jump mixture.
#[derive(Debug, Clone)]
pub struct PathSampler {
    env: Environment,
    n: usize,
    proposal: Option<BigJumpProposal>,
}

impl PathSampler {
    pub fn new(env: &Environment, n: usize, is: Option<&ISConfig>) -> Result<Self, ISConfigError> {
        let proposal = match is {
            Some(cfg) if n > 0 => Some(BigJumpProposal::new(&env.model, n, cfg)?),
            Some(cfg) => {
                cfg.check()?;
                None
            }
            None => None,
        };
        Ok(PathSampler { env: *env, n, proposal })
    }

    pub fn proposal(&self) -> Option<&BigJumpProposal> {
        self.proposal.as_ref()
    }

    /// Fills `path` with `n` steps and returns the likelihood ratio against
    /// the nominal tilted law (1 without a mixture).
    pub fn fill<R: Rng + ?Sized>(&self, path: &mut EnvPath, xs: &mut Vec<f64>, rng: &mut R) -> f64 {
        match &self.proposal {
            None => {
                self.env.fill_path(path, self.n, Measure::Tilted, rng);
                1.0
            }
            Some(p) => {
                let w = p.sample_increments(&self.env.model, xs, rng);
                path.clear();
                for &x in xs.iter() {
                    let st = self.env.step_with_x(x, rng);
                    path.push(st);
                }
                w
            }
        }
    }
}
