use serde::{Deserialize, Serialize};

use crate::env_model::Measure;
use crate::importance::ISConfig;
use crate::quenched::{sample_g, w_limit, EnvPath, Environment, LimitPgf, WLimitOptions};
use crate::special::{integrate_pieces, Quadrature, Tolerance};
use crate::stats::{merge_moments, Estimate, Moments};
use crate::streams::{run_blocks, RandomStreams};

use super::{tilted_blocks, EstimatorError};

/// Share of the last term below which the series for `C₀` is truncated.
pub const SERIES_SHARE: f64 = 0.01;
/// Consecutive non-decreasing terms that flag a non-summable series.
pub const NONSUMMABLE_RUN: usize = 5;

/// `b_n^{-1} E_tilted[(1 - f_{0,n}(0)) e^{-ρ S_n}]`, which tends to `C₀`.
pub fn c0_direct(
    env: &Environment,
    n: usize,
    samples: u64,
    is: Option<&ISConfig>,
    streams: &RandomStreams,
) -> Result<Estimate, EstimatorError> {
    let b = env.model.b_n(n)?;
    let blocks = tilted_blocks(env, n, samples, is, streams, Moments::default, |m, wp| m.push(wp.weight()))?;
    let m = merge_moments(&blocks);
    Ok(Estimate::new("c0_direct", m.mean(), m.stderr(), samples, streams.seed()).with_n(n).scaled(1.0 / b))
}

/// Law under which the prefix `f_{0,j-1}` of a series term is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrefixMeasure {
    /// Draw the prefix under the original law (infinite variance: the
    /// integral grows like `e^{ρ S_{j-1}}`).
    Original,
    /// Draw the prefix under the tilted law and reweight by
    /// `m^{j-1} e^{-ρ S_{j-1}}`, which cancels that growth.
    #[default]
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CjOptions {
    pub prefix: PrefixMeasure,
    pub w_limit: WLimitOptions,
    /// Tolerance of the quadrature over `v` per sample.
    pub quadrature: Tolerance,
    /// Pieces of the `v`-integral smaller than this share of the running
    /// total end the outward sweep.
    pub cutoff: f64,
}

impl Default for CjOptions {
    fn default() -> Self {
        CjOptions {
            prefix: PrefixMeasure::Tilted,
            w_limit: WLimitOptions::default(),
            quadrature: Tolerance { abs: 0.0, rel: 1e-8 },
            cutoff: 1e-12,
        }
    }
}

/// Integrand `(1 - f_{0,j-1}(g(e^v W))) e^{-ρv}` at `v`.
pub fn cj_integrand(prefix: &EnvPath, g: &LimitPgf, log_w: f64, rho: f64, v: f64) -> f64 {
    let mut lu = g.log_complement(v + log_w);
    for st in prefix.steps().iter().rev() {
        lu = st.log_complement(lu);
    }
    (lu - rho * v).exp()
}

/// `∫ (1 - f_{0,j-1}(g(e^v W))) e^{-ρv} dv` for one draw of
/// `(f_{0,j-1}, g, W)`. The substitution `u = v + ln W` centres the
/// integrand independently of `W` and contributes the factor `W^ρ`.
pub fn cj_integral(prefix: &EnvPath, g: &LimitPgf, log_w: f64, rho: f64, opts: &CjOptions) -> Quadrature {
    let f = |u: f64| cj_integrand(prefix, g, 0.0, rho, u);
    let right = integrate_pieces(&f, 0.0, true, 1.0, opts.quadrature, opts.cutoff);
    let left = integrate_pieces(&f, 0.0, false, 1.0, opts.quadrature, opts.cutoff);
    let scale = (rho * log_w).exp();
    Quadrature {
        value: (left.value + right.value) * scale,
        abs_error: (left.abs_error + right.abs_error) * scale,
        evaluations: left.evaluations + right.evaluations,
        converged: left.converged && right.converged,
    }
}

/// One series term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CjTerm {
    pub j: usize,
    /// `c_j`.
    pub c_j: Estimate,
    /// `m^{-(j-1)} c_j`, the contribution of `j` to `C₀`.
    pub scaled: Estimate,
    /// Samples whose `W` did not meet the convergence test (kept; their
    /// `W` is an upper bound).
    pub w_not_converged: u64,
    /// Samples whose quadrature missed its tolerance.
    pub quadrature_not_converged: u64,
}

/// Estimates `c_j = ∫ E[1 - f_{0,j-1}(g_j(e^v W_j))] e^{-ρv} dv` with
/// independent draws of the prefix, `g_j` and `W_j` and a deterministic
/// quadrature over `v` per draw.
pub fn cj_term(
    env: &Environment,
    j: usize,
    samples: u64,
    opts: &CjOptions,
    streams: &RandomStreams,
) -> Result<CjTerm, EstimatorError> {
    if j == 0 {
        return Err(EstimatorError::InvalidArgument("cj_term needs j >= 1".into()));
    }
    let rho = env.model.params().rho;
    let measure = match opts.prefix {
        PrefixMeasure::Original => Measure::Original,
        PrefixMeasure::Tilted => Measure::Tilted,
    };
    let w_streams = streams.derive("w");
    let blocks = run_blocks(streams, samples, |rng, count, block| {
        let mut w_rng = w_streams.block(block);
        let mut m = Moments::default();
        let (mut w_bad, mut q_bad) = (0u64, 0u64);
        let mut prefix = EnvPath::with_capacity(j - 1);
        for _ in 0..count {
            env.fill_path(&mut prefix, j - 1, measure, rng);
            let g = sample_g(env, rng);
            let w = w_limit(env, opts.w_limit, &mut w_rng);
            w_bad += u64::from(!w.converged);
            let q = cj_integral(&prefix, &g, w.log_value, rho, opts);
            q_bad += u64::from(!q.converged);
            let tilt = match opts.prefix {
                PrefixMeasure::Original => 1.0,
                PrefixMeasure::Tilted => (-rho * prefix.s_n()).exp(),
            };
            m.push(tilt * q.value);
        }
        (m, w_bad, q_bad)
    });
    let m = merge_moments(blocks.iter().map(|b| &b.0));
    let seed = streams.seed();
    let mj = env.model.m().powi(j as i32 - 1);
    let raw = Estimate::new("cj_term", m.mean(), m.stderr(), samples, seed);
    let (c_j, scaled) = match opts.prefix {
        PrefixMeasure::Original => (raw.clone(), raw.scaled(1.0 / mj)),
        PrefixMeasure::Tilted => (raw.clone().scaled(mj), raw),
    };
    Ok(CjTerm {
        j,
        c_j: Estimate { method: "c_j".into(), ..c_j },
        scaled: Estimate { method: "c_j_scaled".into(), ..scaled },
        w_not_converged: blocks.iter().map(|b| b.1).sum(),
        quadrature_not_converged: blocks.iter().map(|b| b.2).sum(),
    })
}

fn term_streams(streams: &RandomStreams, j: usize) -> RandomStreams {
    streams.derive_index(j as u64)
}

struct RunTracker {
    run: usize,
    last: f64,
    partial: f64,
}

impl RunTracker {
    fn new() -> Self {
        RunTracker { run: 0, last: f64::INFINITY, partial: 0.0 }
    }

    fn push(&mut self, j: usize, value: f64) -> Result<(), EstimatorError> {
        self.partial += value;
        self.run = if value >= self.last { self.run + 1 } else { 0 };
        self.last = value;
        if self.run >= NONSUMMABLE_RUN {
            return Err(EstimatorError::Nonsummable { j, partial: self.partial });
        }
        Ok(())
    }
}

/// Terms `j = 1..=j_max`, each from its own stream namespace.
pub fn cj_terms(
    env: &Environment,
    j_max: usize,
    samples: u64,
    opts: &CjOptions,
    streams: &RandomStreams,
) -> Result<Vec<CjTerm>, EstimatorError> {
    let mut tracker = RunTracker::new();
    let mut terms = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let t = cj_term(env, j, samples, opts, &term_streams(streams, j))?;
        tracker.push(j, t.scaled.value)?;
        terms.push(t);
    }
    Ok(terms)
}

/// Partial sum of the series for `C₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub estimate: Estimate,
    /// `m^{-(j-1)} ĉ_j` for the retained terms.
    pub terms: Vec<Estimate>,
    /// Last retained term over the partial sum.
    pub last_share: f64,
    pub j_used: usize,
    /// Whether the share rule stopped the sum before `j_max`.
    pub share_rule_met: bool,
}

/// Applies the truncation rule to precomputed terms.
pub fn c0_from_terms(terms: &[CjTerm]) -> SeriesEstimate {
    assert!(!terms.is_empty(), "c0_from_terms needs at least one term");
    let mut partial = 0.0;
    let mut var = 0.0;
    let mut kept = Vec::new();
    let mut share = 1.0;
    let mut met = false;
    for t in terms {
        partial += t.scaled.value;
        var += t.scaled.stderr.powi(2);
        kept.push(t.scaled.clone());
        share = t.scaled.value / partial;
        if share < SERIES_SHARE {
            met = true;
            break;
        }
    }
    let first = &terms[0].scaled;
    SeriesEstimate {
        estimate: Estimate::new("c0_series", partial, var.sqrt(), first.n_samples, first.seed),
        j_used: kept.len(),
        terms: kept,
        last_share: share,
        share_rule_met: met,
    }
}

/// `C₀ = Σ_j m^{-j+1} c_j`, summed until the last term's share drops below
/// 1% or `j_max` is reached.
pub fn c0_series(
    env: &Environment,
    j_max: usize,
    samples: u64,
    opts: &CjOptions,
    streams: &RandomStreams,
) -> Result<SeriesEstimate, EstimatorError> {
    let mut tracker = RunTracker::new();
    let mut terms = Vec::new();
    for j in 1..=j_max {
        let t = cj_term(env, j, samples, opts, &term_streams(streams, j))?;
        tracker.push(j, t.scaled.value)?;
        let done = t.scaled.value < SERIES_SHARE * tracker.partial;
        terms.push(t);
        if done {
            break;
        }
    }
    Ok(c0_from_terms(&terms))
}

/// Normalized weights `π_j ∝ m^{-j} c_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub probs: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Share of the last term in the truncated normalizer.
    pub truncation_share: f64,
}

/// `π̂` from precomputed terms, with delta-method standard errors.
pub fn pi_from_terms(terms: &[CjTerm]) -> PiEstimate {
    let t: Vec<f64> = terms.iter().map(|c| c.scaled.value).collect();
    let v: Vec<f64> = terms.iter().map(|c| c.scaled.stderr.powi(2)).collect();
    let total: f64 = t.iter().sum();
    let var_total: f64 = v.iter().sum();
    let probs: Vec<f64> = t.iter().map(|x| x / total).collect();
    let stderr = probs
        .iter()
        .zip(&v)
        .map(|(p, vj)| {
            let others = var_total - vj;
            (((1.0 - p).powi(2) * vj + p * p * others) / (total * total)).sqrt()
        })
        .collect();
    PiEstimate { truncation_share: t[t.len() - 1] / total, probs, stderr }
}

pub fn pi_j(
    env: &Environment,
    j_max: usize,
    samples: u64,
    opts: &CjOptions,
    streams: &RandomStreams,
) -> Result<PiEstimate, EstimatorError> {
    Ok(pi_from_terms(&cj_terms(env, j_max, samples, opts, streams)?))
}
