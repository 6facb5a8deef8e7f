use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::estimators::{
    c0_direct, c0_series, jump_fluctuation, kappa_law, pi_j, quenched_mean, survival_naive, survival_tilted,
    yaglom_omega, CjOptions, EstimatorError,
};
use crate::importance::{ISConfig, JumpIndexLaw};
use crate::quenched::Environment;
use crate::stats::Estimate;
use crate::streams::{RandomStreams, STREAM_ALGORITHM};
use crate::walk::{
    estimate_renewal, lemma1_ratio, renewal_laplace, two_jump_prob, two_jump_union_bound, Renewal, Strategy,
    WalkError,
};

use super::config::{ConfigError, Experiment, RunConfig};
use super::output::{EstimateRecord, OutputRecord, RunSummary};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("interrupted after {records} records")]
    Interrupted { records: usize },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl From<WalkError> for RunError {
    fn from(e: WalkError) -> Self {
        RunError::Estimator(e.into())
    }
}

/// All records of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub estimates: Vec<EstimateRecord>,
    pub summary: RunSummary,
}

impl ResultRecord {
    pub fn lines(&self) -> Vec<OutputRecord> {
        let mut v: Vec<OutputRecord> = self.estimates.iter().cloned().map(OutputRecord::Estimate).collect();
        v.push(OutputRecord::Run(self.summary.clone()));
        v
    }

    /// JSONL text without wall-clock fields; equal for equal configs.
    pub fn deterministic_jsonl(&self) -> String {
        self.lines().iter().map(|r| r.deterministic_json() + "\n").collect()
    }

    pub fn find(&self, method: &str, n: Option<usize>) -> Option<&EstimateRecord> {
        self.estimates.iter().find(|r| r.method == method && r.n == n)
    }
}

type Sink<'a> = dyn FnMut(&OutputRecord) -> std::io::Result<()> + Send + 'a;

struct Ctx<'a> {
    cfg: &'a RunConfig,
    env: Environment,
    root: RandomStreams,
    config_hash: String,
    params_hash: String,
    records: Vec<EstimateRecord>,
    sink: &'a mut Sink<'a>,
    cancel: &'a AtomicBool,
    clock: Instant,
}

#[derive(Default)]
struct Fields {
    n: Option<usize>,
    lambda: Option<f64>,
    x: Option<f64>,
    extra: Option<serde_json::Value>,
}

impl Ctx<'_> {
    fn streams(&self, method: &str, n: usize) -> RandomStreams {
        self.root.derive(method).derive_index(n as u64)
    }

    fn check_cancel(&self) -> Result<(), RunError> {
        if self.cancel.load(Ordering::Relaxed) {
            Err(RunError::Interrupted { records: self.records.len() })
        } else {
            Ok(())
        }
    }

    fn start(&mut self) -> Result<(), RunError> {
        self.check_cancel()?;
        self.clock = Instant::now();
        Ok(())
    }

    fn emit(&mut self, method: &str, samples: u64, value: f64, stderr: f64, f: Fields) -> Result<(), RunError> {
        let rec = EstimateRecord {
            experiment: self.cfg.study.experiment.name().to_string(),
            config_hash: self.config_hash.clone(),
            params_hash: self.params_hash.clone(),
            method: method.to_string(),
            n: f.n,
            lambda: f.lambda,
            x: f.x,
            samples,
            value,
            stderr,
            seed: self.cfg.study.seed,
            extra: f.extra,
            wall_time_s: self.clock.elapsed().as_secs_f64(),
        };
        (self.sink)(&OutputRecord::Estimate(rec.clone()))?;
        self.records.push(rec);
        Ok(())
    }

    fn emit_estimate(&mut self, e: &Estimate, f: Fields) -> Result<(), RunError> {
        let f = Fields { n: f.n.or(e.n), ..f };
        self.emit(&e.method, e.n_samples, e.value, e.stderr, f)
    }

    fn is(&self) -> ISConfig {
        self.cfg.study.importance
    }
}

fn run_validate(c: &mut Ctx) -> Result<(), RunError> {
    c.start()?;
    let mt = *c.env.model.moments();
    let table = serde_json::to_value(mt).expect("moment table serializes");
    for (name, v) in table.as_object().expect("object").clone() {
        let value = v.as_f64().expect("numeric moment");
        c.emit(&format!("moment_{name}"), 0, value, 0.0, Fields::default())?;
    }
    let half = c.env.model.params().rho / 2.0;
    let closed = c.env.model.phi(half).expect("rho/2 is in range");
    let quad = c.env.model.phi_quadrature(half);
    let f = Fields { x: Some(half), extra: Some(json!({ "quadrature": quad })), ..Default::default() };
    c.emit("phi", 0, closed, 0.0, f)
}

fn run_survival(c: &mut Ctx) -> Result<(), RunError> {
    let s = &c.cfg.study;
    let (samples, cap) = (s.samples, s.options.cap);
    for &n in &s.n_list.clone() {
        c.start()?;
        let naive = survival_naive(&c.env, n, samples, cap, &c.streams("survival_naive", n));
        let extra = Some(json!({ "cap_exceeded": naive.cap_exceeded }));
        c.emit_estimate(&naive.estimate, Fields { extra, ..Default::default() })?;
        c.start()?;
        let q = quenched_mean(&c.env, n, samples, &c.streams("quenched_mean", n));
        c.emit_estimate(&q, Fields::default())?;
        c.start()?;
        let t = survival_tilted(&c.env, n, samples, None, &c.streams("survival_tilted", n))?;
        c.emit_estimate(&t, Fields::default())?;
        c.start()?;
        let is = c.is();
        let tm = survival_tilted(&c.env, n, samples, Some(&is), &c.streams("survival_tilted_mixture", n))?;
        c.emit_estimate(&tm, Fields::default())?;
    }
    Ok(())
}

fn run_walk_diag(c: &mut Ctx) -> Result<(), RunError> {
    let s = c.cfg.study.clone();
    let o = &s.options;
    let model = c.env.model;
    let mut curves = Vec::new();
    for kind in [Renewal::U, Renewal::V] {
        c.start()?;
        let xs: Vec<f64> = match kind {
            Renewal::U => o.renewal_x.clone(),
            Renewal::V => o.renewal_x.iter().map(|x| -x).collect(),
        };
        let tag = if kind == Renewal::U { "renewal_u" } else { "renewal_v" };
        let curve = estimate_renewal(&model, kind, &xs, o.k_max, s.samples, &c.streams(tag, 0))?;
        for p in &curve.points {
            let extra = Some(json!({ "k_truncation": p.k_truncation, "tail_bound": p.tail_bound, "sup": curve.sup }));
            c.emit(tag, p.n_samples, p.value, p.stderr, Fields { x: Some(p.x), extra, ..Default::default() })?;
        }
        curves.push(curve);
    }
    for (tag, curve) in [("lemma1_limit_ascending", &curves[0]), ("lemma1_limit_descending", &curves[1])] {
        let value = renewal_laplace(curve, o.lambda);
        let rel = curve.points.iter().map(|p| p.stderr / p.value).fold(0.0, f64::max);
        let f = Fields { lambda: Some(o.lambda), ..Default::default() };
        c.emit(tag, s.samples, value, value * rel, f)?;
    }
    for &n in &s.n_list {
        if n < model.min_horizon() {
            continue;
        }
        c.start()?;
        let l1 = lemma1_ratio(&model, o.lambda, n, s.samples, &Strategy::BigJump(c.is()), &c.streams("lemma1_bigjump", n))?;
        for e in [&l1.ascending, &l1.descending] {
            c.emit_estimate(e, Fields { lambda: Some(o.lambda), ..Default::default() })?;
        }
        c.start()?;
        match lemma1_ratio(&model, o.lambda, n, s.samples, &Strategy::Naive, &c.streams("lemma1_naive", n)) {
            Ok(l1) => {
                for e in [&l1.ascending, &l1.descending] {
                    c.emit_estimate(e, Fields { lambda: Some(o.lambda), ..Default::default() })?;
                }
            }
            Err(WalkError::InfeasibleNaive { predicted }) => {
                let extra = Some(json!({ "skipped": "infeasible", "predicted_hits": predicted }));
                c.emit("lemma1_naive", 0, 0.0, 0.0, Fields { n: Some(n), lambda: Some(o.lambda), extra, ..Default::default() })?;
            }
            Err(e) => return Err(e.into()),
        }
        c.start()?;
        let cfg = ISConfig { jump_index_law: JumpIndexLaw::Uniform, ..c.is() };
        let tj = two_jump_prob(
            &model,
            n,
            o.delta,
            o.bound_n,
            o.bound_k,
            s.samples,
            &Strategy::BigJump(cfg),
            &c.streams("two_jump", n),
        )?;
        let bound = two_jump_union_bound(&model, n, o.delta)?;
        c.emit_estimate(&tj, Fields { extra: Some(json!({ "union_bound": bound })), ..Default::default() })?;
    }
    Ok(())
}

fn series_samples(c: &Ctx) -> u64 {
    c.cfg.study.options.series_samples.unwrap_or((c.cfg.study.samples / 5).max(1))
}

fn cj_options(c: &Ctx) -> CjOptions {
    CjOptions { prefix: c.cfg.study.options.prefix, ..Default::default() }
}

fn run_c0(c: &mut Ctx) -> Result<(), RunError> {
    let s = c.cfg.study.clone();
    let is = c.is();
    for &n in &s.n_list {
        c.start()?;
        let e = c0_direct(&c.env, n, s.samples, Some(&is), &c.streams("c0_direct", n))?;
        c.emit_estimate(&e, Fields::default())?;
    }
    c.start()?;
    let series = c0_series(&c.env, s.options.j_max, series_samples(c), &cj_options(c), &c.streams("c0_series", 0))?;
    for (i, t) in series.terms.iter().enumerate() {
        c.emit_estimate(t, Fields { x: Some((i + 1) as f64), ..Default::default() })?;
    }
    let extra = Some(json!({
        "j_used": series.j_used,
        "last_share": series.last_share,
        "share_rule_met": series.share_rule_met,
    }));
    c.emit_estimate(&series.estimate, Fields { extra, ..Default::default() })
}

fn run_yaglom(c: &mut Ctx) -> Result<(), RunError> {
    let s = c.cfg.study.clone();
    let k = s.options.s_points;
    let grid: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    let is = c.is();
    for &n in &s.n_list {
        c.start()?;
        let curve = yaglom_omega(&c.env, &grid, n, s.samples, Some(&is), &c.streams("yaglom", n))?;
        for (sv, e) in curve.s.iter().zip(&curve.omega) {
            let e = Estimate { method: "yaglom_omega".into(), ..e.clone() };
            c.emit_estimate(&e, Fields { x: Some(*sv), ..Default::default() })?;
        }
    }
    Ok(())
}

fn run_bigjump(c: &mut Ctx) -> Result<(), RunError> {
    let s = c.cfg.study.clone();
    let o = &s.options;
    let is = c.is();
    for &n in &s.n_list {
        c.start()?;
        let k = kappa_law(&c.env, n, s.samples, Some(&is), &c.streams("kappa", n))?;
        for j in 1..=o.j_max.min(n) {
            let f = Fields { n: Some(n), x: Some(j as f64), ..Default::default() };
            c.emit("kappa_mass", s.samples, k.masses[j - 1], k.stderr[j - 1], f)?;
        }
        c.emit_estimate(&k.no_jump, Fields::default())?;
        c.emit_estimate(&k.two_jump, Fields::default())?;
        if o.jump_index <= n {
            c.start()?;
            let fixed = ISConfig { jump_index_law: JumpIndexLaw::Fixed { index: o.jump_index }, ..is };
            let jf = jump_fluctuation(&c.env, n, o.jump_index, s.samples, Some(&fixed), o.sigma, &c.streams("jump", n))?;
            let extra = Some(json!({ "ess": jf.ess, "sigma": jf.sigma, "j": jf.j }));
            for e in [&jf.mean, &jf.variance, &jf.cdf_at_zero] {
                c.emit_estimate(e, Fields { extra: extra.clone(), ..Default::default() })?;
            }
        }
    }
    c.start()?;
    let pi = pi_j(&c.env, o.j_max, series_samples(c), &cj_options(c), &c.streams("pi", 0))?;
    for (i, (p, se)) in pi.probs.iter().zip(&pi.stderr).enumerate() {
        let extra = Some(json!({ "truncation_share": pi.truncation_share }));
        c.emit("pi_j", series_samples(c), *p, *se, Fields { x: Some((i + 1) as f64), extra, ..Default::default() })?;
    }
    Ok(())
}

/// Runs the configured experiment on a pool of `batches` worker threads.
pub fn run(config: &RunConfig) -> Result<ResultRecord, RunError> {
    run_with(config, &mut |_| Ok(()), &AtomicBool::new(false))
}

/// As [`run`], handing every record to `sink` as soon as it exists. On an
/// error or when `cancel` is raised, a truncation record is passed to the
/// sink before the error is returned.
pub fn run_with<'a>(
    config: &'a RunConfig,
    sink: &'a mut Sink<'a>,
    cancel: &'a AtomicBool,
) -> Result<ResultRecord, RunError> {
    let env = config.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.batches)
        .build()
        .map_err(|e| RunError::ThreadPool(e.to_string()))?;
    let study = &config.study;
    let started = Instant::now();
    let mut ctx = Ctx {
        cfg: config,
        env,
        root: RandomStreams::new(study.seed).derive(study.experiment.name()),
        config_hash: study.hash(),
        params_hash: study.params_hash(),
        records: Vec::new(),
        sink,
        cancel,
        clock: Instant::now(),
    };
    let outcome = pool.install(|| match study.experiment {
        Experiment::Validate => run_validate(&mut ctx),
        Experiment::Survival => run_survival(&mut ctx),
        Experiment::WalkDiag => run_walk_diag(&mut ctx),
        Experiment::C0 => run_c0(&mut ctx),
        Experiment::Yaglom => run_yaglom(&mut ctx),
        Experiment::Bigjump => run_bigjump(&mut ctx),
    });
    if let Err(e) = outcome {
        let marker = OutputRecord::Truncated {
            experiment: study.experiment.name().to_string(),
            config_hash: ctx.config_hash.clone(),
            reason: e.to_string(),
            records_written: ctx.records.len(),
        };
        (ctx.sink)(&marker)?;
        return Err(e);
    }
    let summary = RunSummary {
        experiment: study.experiment.name().to_string(),
        config_hash: ctx.config_hash.clone(),
        config: study.clone(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        stream_algorithm: STREAM_ALGORITHM.to_string(),
        records: ctx.records.len(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    (ctx.sink)(&OutputRecord::Run(summary.clone()))?;
    Ok(ResultRecord { estimates: ctx.records, summary })
}
