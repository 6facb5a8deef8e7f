//! Functionals of the tilted random walk `S`: extrema, the renewal
//! functions `U` and `V`, the exponential functionals that normalize to
//! integrals against `U` and `V`, and the two-big-jump probability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env_model::{Measure, Model, ModelError};
use crate::importance::{BigJumpProposal, ISConfig, ISConfigError};
use crate::quenched::EnvPath;
use crate::stats::{merge_moments, Estimate, Moments};
use crate::streams::{run_blocks, RandomStreams};

/// Hits below which a naive estimate is reported as infeasible.
pub const NAIVE_MIN_HITS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("walk statistics need at least one step")]
    EmptyPath,
    #[error("naive sampling predicts {predicted:.1} hits; at least {NAIVE_MIN_HITS} are needed")]
    InfeasibleNaive { predicted: f64 },
    #[error("renewal argument {0} has the wrong sign")]
    Argument(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Importance(#[from] ISConfigError),
}

/// Extrema of `S_1..S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub l_n: f64,
    pub m_n: f64,
    /// Smallest `k ∈ 0..=n` with `S_k = l_n`; `n + 1` never occurs, but if
    /// `l_n > 0` the scan still starts at `S_0`.
    pub tau_n: usize,
    pub s_n: f64,
}

/// Extrema from prefix sums `S_0..S_n` (exact comparisons, ties broken by
/// the smallest index).
pub fn stats_from_sums(s: &[f64]) -> Result<WalkStats, WalkError> {
    if s.len() < 2 {
        return Err(WalkError::EmptyPath);
    }
    let tail = &s[1..];
    let l_n = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let m_n = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tau_n = s.iter().position(|&v| v == l_n).expect("l_n is attained");
    Ok(WalkStats { l_n, m_n, tau_n, s_n: s[s.len() - 1] })
}

pub fn stats(path: &EnvPath) -> Result<WalkStats, WalkError> {
    stats_from_sums(path.s())
}

/// Which renewal function is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Renewal {
    /// `U(x) = 1 + Σ_k P(-S_k ≤ x, M_k < 0)`, `x ≥ 0`.
    U,
    /// `V(x) = 1 + Σ_k P(-S_k > x, L_k ≥ 0)`, `x ≤ 0`.
    V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalEstimate {
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
    pub k_truncation: usize,
    /// Empirical bound on the size of the last retained term:
    /// `P(S_k ≥ -x)` for `U`, `P(L_k ≥ 0)` for `V`, at `k = k_truncation`.
    pub tail_bound: f64,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalCurve {
    pub kind: Renewal,
    pub points: Vec<RenewalEstimate>,
    /// Largest estimate over the probed arguments.
    pub sup: f64,
}

impl RenewalCurve {
    /// Piecewise-linear interpolation in `|x|`, constant beyond the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let z = x.abs();
        let pts = &self.points;
        if z <= pts[0].x.abs() {
            return pts[0].value;
        }
        for w in pts.windows(2) {
            let (z0, z1) = (w[0].x.abs(), w[1].x.abs());
            if z <= z1 {
                let t = (z - z0) / (z1 - z0);
                return w[0].value + t * (w[1].value - w[0].value);
            }
        }
        pts[pts.len() - 1].value
    }
}

#[derive(Clone, Default)]
struct RenewalBlock {
    sums: Vec<Moments>,
    tail: Vec<u64>,
}

/// Estimates `U` or `V` on a grid of arguments from one set of tilted paths
/// of length `k_max`; each path contributes every term of the series.
/// Arguments must be sorted by increasing `|x|`.
pub fn estimate_renewal(
    model: &Model,
    kind: Renewal,
    xs: &[f64],
    k_max: usize,
    samples: u64,
    streams: &RandomStreams,
) -> Result<RenewalCurve, WalkError> {
    for &x in xs {
        let bad = match kind {
            Renewal::U => !(x >= 0.0),
            Renewal::V => !(x <= 0.0),
        };
        if bad {
            return Err(WalkError::Argument(x));
        }
    }
    let blocks = run_blocks(streams, samples, |rng, count, _| {
        let mut b = RenewalBlock { sums: vec![Moments::default(); xs.len()], tail: vec![0; xs.len()] };
        let mut counts = vec![0u32; xs.len()];
        for _ in 0..count {
            counts.iter_mut().for_each(|c| *c = 0);
            let (mut s, mut ext) = (0.0f64, match kind {
                Renewal::U => f64::NEG_INFINITY,
                Renewal::V => f64::INFINITY,
            });
            let mut alive = true;
            for _ in 0..k_max {
                s += model.sample_x(Measure::Tilted, rng);
                if !alive {
                    continue;
                }
                match kind {
                    Renewal::U => {
                        ext = ext.max(s);
                        if ext >= 0.0 {
                            alive = false;
                            continue;
                        }
                        for (c, &x) in counts.iter_mut().zip(xs) {
                            if -s <= x {
                                *c += 1;
                            }
                        }
                    }
                    Renewal::V => {
                        ext = ext.min(s);
                        if ext < 0.0 {
                            alive = false;
                            continue;
                        }
                        for (c, &x) in counts.iter_mut().zip(xs) {
                            if -s > x {
                                *c += 1;
                            }
                        }
                    }
                }
            }
            for (i, &x) in xs.iter().enumerate() {
                b.sums[i].push(counts[i] as f64);
                let tail_hit = match kind {
                    Renewal::U => s >= -x,
                    Renewal::V => alive,
                };
                b.tail[i] += u64::from(tail_hit);
            }
        }
        b
    });
    let mut points = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let m = merge_moments(blocks.iter().map(|b| &b.sums[i]));
        let tail: u64 = blocks.iter().map(|b| b.tail[i]).sum();
        points.push(RenewalEstimate {
            x,
            value: 1.0 + m.mean(),
            stderr: m.stderr(),
            k_truncation: k_max,
            tail_bound: tail as f64 / samples as f64,
            n_samples: samples,
        });
    }
    let sup = points.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(RenewalCurve { kind, points, sup })
}

pub fn estimate_u(
    model: &Model,
    x: f64,
    k_max: usize,
    samples: u64,
    streams: &RandomStreams,
) -> Result<RenewalEstimate, WalkError> {
    Ok(estimate_renewal(model, Renewal::U, &[x], k_max, samples, streams)?.points.remove(0))
}

pub fn estimate_v(
    model: &Model,
    x: f64,
    k_max: usize,
    samples: u64,
    streams: &RandomStreams,
) -> Result<RenewalEstimate, WalkError> {
    Ok(estimate_renewal(model, Renewal::V, &[x], k_max, samples, streams)?.points.remove(0))
}

/// Sampling scheme for the rare-event walk functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Naive,
    BigJump(ISConfig),
}

/// `b_n^{-1} E[e^{λS_n}; M_n < 0]` and `b_n^{-1} E[e^{-λS_n}; L_n ≥ 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Estimate {
    pub ascending: Estimate,
    pub descending: Estimate,
}

/// Expected number of paths in `samples` naive draws that carry an
/// increment of size at least `an`.
pub fn predicted_naive_hits(model: &Model, n: usize, samples: u64) -> f64 {
    let c = (model.a() * n as f64).max(model.params().x0);
    samples as f64 * (n as f64 * model.tail_a(c).unwrap_or(1.0)).min(1.0)
}

fn increments_into<R: rand::Rng + ?Sized>(
    model: &Model,
    n: usize,
    proposal: Option<&BigJumpProposal>,
    xs: &mut Vec<f64>,
    rng: &mut R,
) -> f64 {
    match proposal {
        Some(p) => p.sample_increments(model, xs, rng),
        None => {
            xs.clear();
            xs.extend((0..n).map(|_| model.sample_x(Measure::Tilted, rng)));
            1.0
        }
    }
}

/// Weighted mean of `value(xs)` over tilted paths of length `n`.
fn walk_mean<F>(
    model: &Model,
    n: usize,
    samples: u64,
    proposal: Option<&BigJumpProposal>,
    streams: &RandomStreams,
    value: F,
) -> Moments
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let blocks = run_blocks(streams, samples, |rng, count, _| {
        let mut xs = Vec::with_capacity(n);
        let mut m = Moments::default();
        for _ in 0..count {
            let w = increments_into(model, n, proposal, &mut xs, rng);
            m.push(w * value(&xs));
        }
        m
    });
    merge_moments(&blocks)
}

fn ascending_value(lambda: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |xs: &[f64]| {
        let mut s = 0.0;
        for &x in xs {
            s += x;
            if s >= 0.0 {
                return 0.0;
            }
        }
        (lambda * s).exp()
    }
}

fn descending_value(lambda: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |xs: &[f64]| {
        let mut s = 0.0;
        for &x in xs {
            s += x;
            if s < 0.0 {
                return 0.0;
            }
        }
        (-lambda * s).exp()
    }
}

/// Estimates both exponential functionals at horizon `n`.
///
/// With [`Strategy::BigJump`] the descending side uses the configured index
/// law and the ascending side its time reversal, since a path that stays
/// below zero and ends near zero makes its big jump at the end.
pub fn lemma1_ratio(
    model: &Model,
    lambda: f64,
    n: usize,
    samples: u64,
    strategy: &Strategy,
    streams: &RandomStreams,
) -> Result<Lemma1Estimate, WalkError> {
    let b = model.b_n(n)?;
    let seed = streams.seed();
    let (up, down, tag) = match strategy {
        Strategy::Naive => {
            let predicted = predicted_naive_hits(model, n, samples);
            if predicted < NAIVE_MIN_HITS {
                return Err(WalkError::InfeasibleNaive { predicted });
            }
            (None, None, "naive")
        }
        Strategy::BigJump(cfg) => {
            let down = BigJumpProposal::new(model, n, cfg)?;
            let reversed = cfg.with_law(cfg.jump_index_law.reversed(n));
            let up = BigJumpProposal::new(model, n, &reversed)?;
            (Some(up), Some(down), "bigjump")
        }
    };
    let asc = walk_mean(model, n, samples, up.as_ref(), &streams.derive("ascending"), ascending_value(lambda));
    let desc = walk_mean(model, n, samples, down.as_ref(), &streams.derive("descending"), descending_value(lambda));
    let est = |name: &str, m: Moments| {
        Estimate::new(format!("lemma1_{name}_{tag}"), m.mean() / b, m.stderr() / b, samples, seed).with_n(n)
    };
    Ok(Lemma1Estimate { ascending: est("ascending", asc), descending: est("descending", desc) })
}

/// `∫_0^∞ e^{-λz} R(z) dz` with `R` interpolated from a renewal curve on
/// `z ∈ [0, z_max]` (trapezoid rule, constant extrapolation beyond).
pub fn renewal_laplace(curve: &RenewalCurve, lambda: f64) -> f64 {
    let pts = &curve.points;
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (z0, z1) = (w[0].x.abs(), w[1].x.abs());
        // exact integral of e^{-λz} times the linear interpolant
        let (v0, v1) = (w[0].value, w[1].value);
        let slope = (v1 - v0) / (z1 - z0);
        let prim = |z: f64| -(-lambda * z).exp() * ((v0 + slope * (z - z0)) / lambda + slope / (lambda * lambda));
        total += prim(z1) - prim(z0);
    }
    let first = pts[0].x.abs();
    total += pts[0].value * (1.0 - (-lambda * first).exp()) / lambda;
    let last = &pts[pts.len() - 1];
    total + last.value * (-lambda * last.x.abs()).exp() / lambda
}

/// `b_n^{-1} P(two indices with X ≥ δan, L_n ≥ -N, |S_n| ≤ K)`.
#[allow(clippy::too_many_arguments)]
pub fn two_jump_prob(
    model: &Model,
    n: usize,
    delta: f64,
    bound_n: f64,
    bound_k: f64,
    samples: u64,
    strategy: &Strategy,
    streams: &RandomStreams,
) -> Result<Estimate, WalkError> {
    let b = model.b_n(n)?;
    let level = delta * model.a() * n as f64;
    let (proposal, tag) = match strategy {
        Strategy::Naive => (None, "naive"),
        Strategy::BigJump(cfg) => {
            let cfg = ISConfig { forced_jumps: 2, jump_threshold_delta: delta, ..*cfg };
            (Some(BigJumpProposal::new(model, n, &cfg)?), "bigjump")
        }
    };
    let m = walk_mean(model, n, samples, proposal.as_ref(), streams, |xs| {
        let big = xs.iter().filter(|&&x| x >= level).count();
        if big < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for &x in xs {
            s += x;
            if s < -bound_n {
                return 0.0;
            }
        }
        f64::from(u8::from(s.abs() <= bound_k))
    });
    Ok(Estimate::new(format!("two_jump_{tag}"), m.mean() / b, m.stderr() / b, samples, streams.seed()).with_n(n))
}

/// Union bound `n² A(δan)² / b_n` for [`two_jump_prob`].
pub fn two_jump_union_bound(model: &Model, n: usize, delta: f64) -> Result<f64, WalkError> {
    let level = (delta * model.a() * n as f64).max(model.params().x0);
    let a = model.tail_a(level)?;
    Ok((n as f64).powi(2) * a * a / model.b_n(n)?)
}
