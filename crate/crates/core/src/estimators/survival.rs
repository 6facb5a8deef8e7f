use crate::env_model::Measure;
use crate::importance::ISConfig;
use crate::quenched::{log_survival_steps, simulate_particles, survival_q, EnvPath, Environment};
use crate::stats::{merge_moments, Estimate, Moments};
use crate::streams::{run_blocks, RandomStreams};

use super::{tilted_blocks, EstimatorError};

/// Population cap of the particle simulation.
pub const DEFAULT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveSurvival {
    pub estimate: Estimate,
    /// Runs that hit the population cap. Those runs contribute the exact
    /// conditional survival probability given the population at the cap.
    pub cap_exceeded: u64,
}

/// Frequency of `Z_n > 0` over particle simulations from one ancestor in
/// environments drawn under the original measure.
pub fn survival_naive(env: &Environment, n: usize, samples: u64, cap: u64, streams: &RandomStreams) -> NaiveSurvival {
    let blocks = run_blocks(streams, samples, |rng, count, _| {
        let mut m = Moments::default();
        let mut capped = 0u64;
        let mut path = EnvPath::with_capacity(n);
        for _ in 0..count {
            env.fill_path(&mut path, n, Measure::Original, rng);
            let v = match simulate_particles(&path, 1, cap, rng) {
                Ok(z) => f64::from(u8::from(z > 0)),
                Err(e) => {
                    capped += 1;
                    let u = log_survival_steps(&path.steps()[e.generation..], 0.0).exp();
                    if u == 0.0 {
                        0.0
                    } else {
                        // P(Z_n > 0 | Z_g = z) = 1 - (1 - u)^z
                        -(e.population * (-u).ln_1p()).exp_m1()
                    }
                }
            };
            m.push(v);
        }
        (m, capped)
    });
    let m = merge_moments(blocks.iter().map(|b| &b.0));
    NaiveSurvival {
        estimate: Estimate::new("survival_naive", m.mean(), m.stderr(), samples, streams.seed()).with_n(n),
        cap_exceeded: blocks.iter().map(|b| b.1).sum(),
    }
}

/// Mean of the quenched survival probability over environments drawn under
/// the original measure.
pub fn quenched_mean(env: &Environment, n: usize, samples: u64, streams: &RandomStreams) -> Estimate {
    let blocks = run_blocks(streams, samples, |rng, count, _| {
        let mut m = Moments::default();
        let mut path = EnvPath::with_capacity(n);
        for _ in 0..count {
            env.fill_path(&mut path, n, Measure::Original, rng);
            m.push(survival_q(&path, 0.0));
        }
        m
    });
    let m = merge_moments(&blocks);
    Estimate::new("quenched_mean", m.mean(), m.stderr(), samples, streams.seed()).with_n(n)
}

/// `P(Z_n > 0) = m^n E_tilted[(1 - f_{0,n}(0)) e^{-ρ S_n}]`, optionally with
/// the big-jump mixture.
pub fn survival_tilted(
    env: &Environment,
    n: usize,
    samples: u64,
    is: Option<&ISConfig>,
    streams: &RandomStreams,
) -> Result<Estimate, EstimatorError> {
    let blocks = tilted_blocks(env, n, samples, is, streams, Moments::default, |m, wp| m.push(wp.weight()))?;
    let m = merge_moments(&blocks);
    let method = if is.is_some() { "survival_tilted_mixture" } else { "survival_tilted" };
    let scale = env.model.m().powi(n as i32);
    Ok(Estimate::new(method, m.mean(), m.stderr(), samples, streams.seed()).with_n(n).scaled(scale))
}
