use serde::{Deserialize, Serialize};

use crate::importance::ISConfig;
use crate::quenched::{log_survival_q, Environment};
use crate::stats::{effective_sample_size, jackknife, Estimate, WeightedEcdf};
use crate::streams::RandomStreams;

use super::{tilted_blocks, EstimatorError};

fn ratio_estimate(blocks: &[Vec<f64>], num: usize, den: usize) -> (f64, f64) {
    jackknife(blocks, |t| if t[den] == 0.0 { 0.0 } else { t[num] / t[den] })
}

/// `Ω̂(s)` on a grid of `s` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YaglomCurve {
    pub s: Vec<f64>,
    pub omega: Vec<Estimate>,
}

/// `Ω̂(s) = 1 - Ê[(1 - f_{0,n}(s)) e^{-ρS_n}] / Ê[(1 - f_{0,n}(0)) e^{-ρS_n}]`
/// with one path set for numerator and denominator and block-jackknife
/// standard errors.
pub fn yaglom_omega(
    env: &Environment,
    s_grid: &[f64],
    n: usize,
    samples: u64,
    is: Option<&ISConfig>,
    streams: &RandomStreams,
) -> Result<YaglomCurve, EstimatorError> {
    if let Some(&bad) = s_grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(EstimatorError::InvalidArgument(format!("s = {bad} outside [0, 1]")));
    }
    let rho = env.model.params().rho;
    let k = s_grid.len();
    let blocks = tilted_blocks(
        env,
        n,
        samples,
        is,
        streams,
        || vec![0.0; k + 1],
        |acc, wp| {
            let shift = wp.is_weight.ln() - rho * wp.path.s_n();
            acc[0] += (log_survival_q(wp.path, 0.0) + shift).exp();
            for (i, &s) in s_grid.iter().enumerate() {
                acc[i + 1] += (log_survival_q(wp.path, s) + shift).exp();
            }
        },
    )?;
    let omega = (0..k)
        .map(|i| {
            let (v, se) = jackknife(&blocks, |t| if t[0] == 0.0 { 0.0 } else { 1.0 - t[i + 1] / t[0] });
            Estimate::new(format!("yaglom_omega[s={}]", s_grid[i]), v, se, samples, streams.seed()).with_n(n)
        })
        .collect();
    Ok(YaglomCurve { s: s_grid.to_vec(), omega })
}

/// Survival-weighted law of `ϰ = min{j : X_j ≥ an/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaLaw {
    pub n: usize,
    /// `P(ϰ = j)` for `j = 1..=n` (index `j - 1`).
    pub masses: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mass of paths without an increment of size `an/2`.
    pub no_jump: Estimate,
    /// Mass of paths with at least two increments of size `an/2`.
    pub two_jump: Estimate,
    pub n_samples: u64,
}

pub fn kappa_law(
    env: &Environment,
    n: usize,
    samples: u64,
    is: Option<&ISConfig>,
    streams: &RandomStreams,
) -> Result<KappaLaw, EstimatorError> {
    let level = env.model.a() * n as f64 / 2.0;
    // layout: [den, ϰ = 1..=n, none, two or more]
    let blocks = tilted_blocks(
        env,
        n,
        samples,
        is,
        streams,
        || vec![0.0; n + 3],
        |acc, wp| {
            let w = wp.weight();
            acc[0] += w;
            let mut first = None;
            let mut count = 0;
            for (i, st) in wp.path.steps().iter().enumerate() {
                if st.x() >= level {
                    count += 1;
                    first.get_or_insert(i);
                }
            }
            match first {
                Some(i) => acc[i + 1] += w,
                None => acc[n + 1] += w,
            }
            if count >= 2 {
                acc[n + 2] += w;
            }
        },
    )?;
    let (mut masses, mut stderr) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 1..=n {
        let (v, se) = ratio_estimate(&blocks, j, 0);
        masses.push(v);
        stderr.push(se);
    }
    let seed = streams.seed();
    let est = |name: &str, idx: usize| {
        let (v, se) = ratio_estimate(&blocks, idx, 0);
        Estimate::new(name, v, se, samples, seed).with_n(n)
    };
    Ok(KappaLaw {
        n,
        masses,
        stderr,
        no_jump: est("kappa_no_jump", n + 1),
        two_jump: est("kappa_two_jump", n + 2),
        n_samples: samples,
    })
}

/// Which variance of `X` standardizes the jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMeasure {
    Original,
    #[default]
    Tilted,
}

/// Weighted sample of `(X_ϰ - an) / (σ√n)` on `{Z_n > 0, X_j ≥ an/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpFluctuation {
    pub n: usize,
    pub j: usize,
    pub sigma: f64,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub mean: Estimate,
    pub variance: Estimate,
    pub cdf_at_zero: Estimate,
    pub ess: f64,
}

impl JumpFluctuation {
    pub fn ecdf(&self) -> WeightedEcdf {
        WeightedEcdf::new(&self.values, &self.weights)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn jump_fluctuation(
    env: &Environment,
    n: usize,
    j: usize,
    samples: u64,
    is: Option<&ISConfig>,
    sigma_measure: SigmaMeasure,
    streams: &RandomStreams,
) -> Result<JumpFluctuation, EstimatorError> {
    if j == 0 || j > n {
        return Err(EstimatorError::InvalidArgument(format!("jump index {j} outside 1..={n}")));
    }
    let mt = env.model.moments();
    let sigma = match sigma_measure {
        SigmaMeasure::Original => mt.var_x_orig,
        SigmaMeasure::Tilted => mt.var_x_tilted,
    }
    .sqrt();
    let an = env.model.a() * n as f64;
    let scale = sigma * (n as f64).sqrt();
    // block sums: [Σw, Σwv, Σwv², Σw 1{v ≤ 0}] plus the raw pairs
    let blocks = tilted_blocks(
        env,
        n,
        samples,
        is,
        streams,
        || (vec![0.0; 4], Vec::new()),
        |(sums, pairs), wp| {
            let steps = wp.path.steps();
            if steps[j - 1].x() < an / 2.0 {
                return;
            }
            let w = wp.weight();
            if w == 0.0 {
                return;
            }
            let x_kappa = steps.iter().find(|st| st.x() >= an / 2.0).expect("X_j qualifies").x();
            let v = (x_kappa - an) / scale;
            sums[0] += w;
            sums[1] += w * v;
            sums[2] += w * v * v;
            sums[3] += if v <= 0.0 { w } else { 0.0 };
            pairs.push((v, w));
        },
    )?;
    let sums: Vec<Vec<f64>> = blocks.iter().map(|b| b.0.clone()).collect();
    let (values, weights): (Vec<f64>, Vec<f64>) = blocks.into_iter().flat_map(|b| b.1).unzip();
    let ess = effective_sample_size(&weights);
    if ess < 100.0 {
        return Err(EstimatorError::DegenerateSample { ess });
    }
    let seed = streams.seed();
    let mk = |name: &str, (v, se): (f64, f64)| Estimate::new(name, v, se, samples, seed).with_n(n);
    let mean = mk("jump_fluctuation_mean", ratio_estimate(&sums, 1, 0));
    let variance = mk(
        "jump_fluctuation_variance",
        jackknife(&sums, |t| {
            let m = t[1] / t[0];
            t[2] / t[0] - m * m
        }),
    );
    let cdf_at_zero = mk("jump_fluctuation_cdf0", ratio_estimate(&sums, 3, 0));
    Ok(JumpFluctuation { n, j, sigma, values, weights, mean, variance, cdf_at_zero, ess })
}
