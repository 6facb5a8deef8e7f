//! Monte Carlo estimators of the survival asymptotics and of the laws that
//! describe a surviving population.
//!
//! Every estimator works under the tilted measure: for a functional `F` of
//! the first `n` environments,
//! `E[F] = m^n E_tilted[F e^{-ρ S_n}]`. Survival is rare but, under the
//! tilt, only polynomially so; the optional big-jump mixture in
//! [`crate::importance`] takes care of the remaining polynomial rarity.

mod conditioned;
mod constant;
mod survival;

pub use conditioned::{
    jump_fluctuation, kappa_law, yaglom_omega, JumpFluctuation, KappaLaw, SigmaMeasure, YaglomCurve,
};
pub use constant::{
    c0_direct, c0_from_terms, c0_series, cj_integral, cj_integrand, cj_term, cj_terms, pi_from_terms, pi_j,
    CjOptions, CjTerm, PiEstimate, PrefixMeasure, SeriesEstimate,
};
pub use survival::{quenched_mean, survival_naive, survival_tilted, NaiveSurvival, DEFAULT_CAP};

use thiserror::Error;

use crate::env_model::ModelError;
use crate::importance::{ISConfig, ISConfigError, PathSampler};
use crate::quenched::{log_survival_q, EnvPath, Environment, QuenchedError};
use crate::streams::{run_blocks, RandomStreams};
use crate::walk::WalkError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Importance(#[from] ISConfigError),
    #[error(transparent)]
    Quenched(#[from] QuenchedError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("series terms stopped decreasing at j = {j} (partial sum {partial})")]
    Nonsummable { j: usize, partial: f64 },
    #[error("effective sample size {ess:.1} is below 100")]
    DegenerateSample { ess: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}

/// One tilted path together with its likelihood ratio and the survival
/// weight `(1 - f_{0,n}(0)) e^{-ρ S_n}`.
pub(crate) struct WeightedPath<'a> {
    pub path: &'a EnvPath,
    pub is_weight: f64,
    pub log_y: f64,
}

impl WeightedPath<'_> {
    /// `is_weight × (1 - f_{0,n}(0)) e^{-ρ S_n}`.
    pub fn weight(&self) -> f64 {
        self.is_weight * self.log_y.exp()
    }
}

/// Runs `visit` for every tilted path of every block and returns the
/// per-block accumulators in block order.
pub(crate) fn tilted_blocks<T, F>(
    env: &Environment,
    n: usize,
    samples: u64,
    is: Option<&ISConfig>,
    streams: &RandomStreams,
    init: impl Fn() -> T + Sync,
    visit: F,
) -> Result<Vec<T>, EstimatorError>
where
    T: Send,
    F: Fn(&mut T, &WeightedPath) + Sync,
{
    let sampler = PathSampler::new(env, n, is)?;
    let rho = env.model.params().rho;
    Ok(run_blocks(streams, samples, |rng, count, _| {
        let mut acc = init();
        let mut path = EnvPath::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        for _ in 0..count {
            let is_weight = sampler.fill(&mut path, &mut xs, rng);
            if let Some(p) = sampler.proposal() {
                debug_assert!(is_weight <= p.weight_bound() * (1.0 + 1e-12));
            }
            let log_y = log_survival_q(&path, 0.0) - rho * path.s_n();
            visit(&mut acc, &WeightedPath { path: &path, is_weight, log_y });
        }
        acc
    }))
}
