//! Acceptance criteria at their stated scale, one line per criterion.
//!
//! Set `BPRE_CRITERIA=3,7` to run a subset.

use std::time::Instant;

use bpre::env_model::{validate, Model, ModelParams};
use bpre::estimators::{
    c0_direct, c0_series, jump_fluctuation, kappa_law, pi_j, quenched_mean, survival_naive, survival_tilted,
    yaglom_omega, CjOptions, SigmaMeasure, DEFAULT_CAP,
};
use bpre::harness::{run, Experiment, RunConfig};
use bpre::importance::{ISConfig, JumpIndexLaw};
use bpre::quenched::Environment;
use bpre::stats::Estimate;
use bpre::streams::RandomStreams;
use bpre::walk::{estimate_renewal, lemma1_ratio, renewal_laplace, two_jump_prob, Renewal, Strategy};

struct Outcome {
    pass: bool,
    detail: String,
}

fn model() -> Model {
    validate(ModelParams::default()).expect("default model validates")
}

fn env() -> Environment {
    Environment::geometric(model())
}

fn fmt(e: &Estimate) -> String {
    format!("{:.4e}±{:.1e}", e.value, e.stderr)
}

fn z(a: &Estimate, b: &Estimate) -> f64 {
    (a.value - b.value).abs() / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

/// Joint z-score where `naive` is a mean of survival indicators: its variance
/// under the hypothesis of a common value `p` is `p(1 - p)/N`, which stays
/// meaningful when no survivor was observed.
fn z_naive(naive: &Estimate, other: &Estimate) -> f64 {
    let p = other.value.clamp(0.0, 1.0);
    let null_se = (p * (1.0 - p) / naive.n_samples as f64).sqrt();
    let se = naive.stderr.max(null_se);
    (naive.value - other.value).abs() / (se * se + other.stderr.powi(2)).sqrt()
}

fn criterion_1() -> Outcome {
    let env = env();
    let streams = RandomStreams::new(101);
    let samples = 1_000_000;
    let is = ISConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [3usize, 5, 8] {
        let s = streams.derive_index(n as u64);
        let naive = survival_naive(&env, n, samples, DEFAULT_CAP, &s.derive("naive")).estimate;
        let qm = quenched_mean(&env, n, samples, &s.derive("quenched"));
        let plain = survival_tilted(&env, n, samples, None, &s.derive("tilted")).unwrap();
        let mixed = survival_tilted(&env, n, samples, Some(&is), &s.derive("mixture")).unwrap();
        let others = [&qm, &plain, &mixed];
        let mut worst: f64 = others.iter().map(|o| z_naive(&naive, o)).fold(0.0, f64::max);
        for (i, a) in others.iter().enumerate() {
            for b in &others[i + 1..] {
                worst = worst.max(z(a, b));
            }
        }
        pass &= worst <= 4.0;
        parts.push(format!(
            "n={n}: naive {} quenched {} tilted {} mixture {} max|z| {worst:.2}",
            fmt(&naive),
            fmt(&qm),
            fmt(&plain),
            fmt(&mixed)
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_2() -> Outcome {
    let env = env();
    let streams = RandomStreams::new(102);
    let log_m = env.model.m().ln();
    let is = ISConfig::default();
    let devs: Vec<f64> = [20usize, 40, 80]
        .iter()
        .map(|&n| {
            let e = survival_tilted(&env, n, 1_000_000, Some(&is), &streams.derive_index(n as u64)).unwrap();
            e.value.ln() / n as f64 - log_m
        })
        .collect();
    let shrinking = devs.windows(2).all(|w| w[1].abs() < w[0].abs());
    let gap = devs[2].abs();
    let target = 0.01 * log_m.abs();
    Outcome {
        pass: shrinking && gap < target,
        detail: format!(
            "log(P)/n - log m at n=20,40,80: {:.4}, {:.4}, {:.4}; shrinking {shrinking}; final gap {gap:.4} vs {target:.4}",
            devs[0], devs[1], devs[2]
        ),
    }
}

fn criterion_3() -> Outcome {
    let env = env();
    let streams = RandomStreams::new(103);
    let is = ISConfig::default();
    let direct: Vec<Estimate> = [30usize, 60, 120]
        .iter()
        .map(|&n| c0_direct(&env, n, 1_000_000, Some(&is), &streams.derive_index(n as u64)).unwrap())
        .collect();
    let changes: Vec<f64> = direct.windows(2).map(|w| (w[1].value - w[0].value).abs() / w[0].value).collect();
    let plateau = changes.iter().all(|&c| c < 0.15);
    let series = c0_series(&env, 8, 40_000, &CjOptions::default(), &streams.derive("series")).unwrap();
    let last = &direct[2];
    let s = &series.estimate;
    let rel = (last.value - s.value).abs() / s.value;
    let overlap = (last.value - s.value).abs() <= 2.0 * (last.stderr + s.stderr);
    Outcome {
        pass: plateau && (rel < 0.10 || overlap),
        detail: format!(
            "direct n=30,60,120: {}, {}, {} (changes {:.1}%, {:.1}%); series {} with {} terms (last share {:.4}); relative gap {:.1}%",
            fmt(&direct[0]),
            fmt(&direct[1]),
            fmt(&direct[2]),
            100.0 * changes[0],
            100.0 * changes[1],
            fmt(s),
            series.j_used,
            series.last_share,
            100.0 * rel
        ),
    }
}

fn criterion_4() -> Outcome {
    let model = model();
    let streams = RandomStreams::new(104);
    let lambda = 1.0;
    let big = Strategy::BigJump(ISConfig::default());

    let naive = lemma1_ratio(&model, lambda, 10, 100_000_000, &Strategy::Naive, &streams.derive("naive10")).unwrap();
    let bj10 = lemma1_ratio(&model, lambda, 10, 10_000_000, &big, &streams.derive("big10")).unwrap();
    let z_asc = z(&naive.ascending, &bj10.ascending);
    let z_desc = z(&naive.descending, &bj10.descending);
    let small_n = z_asc <= 4.0 && z_desc <= 4.0;

    let r30 = lemma1_ratio(&model, lambda, 30, 2_000_000, &big, &streams.derive("big30")).unwrap();
    let r60 = lemma1_ratio(&model, lambda, 60, 2_000_000, &big, &streams.derive("big60")).unwrap();
    let rel = |a: &Estimate, b: &Estimate| (a.value - b.value).abs() / b.value;
    let self_asc = rel(&r30.ascending, &r60.ascending);
    let self_desc = rel(&r30.descending, &r60.descending);
    let self_consistent = self_asc < 0.15 && self_desc < 0.15;

    let grid: Vec<f64> = (0..=160).map(|i| i as f64 * 0.25).collect();
    let neg: Vec<f64> = grid.iter().map(|x| -x).collect();
    let u = estimate_renewal(&model, Renewal::U, &grid, 400, 100_000, &streams.derive("u")).unwrap();
    let v = estimate_renewal(&model, Renewal::V, &neg, 400, 100_000, &streams.derive("v")).unwrap();
    let (lim_asc, lim_desc) = (renewal_laplace(&u, lambda), renewal_laplace(&v, lambda));
    let q_asc = (r60.ascending.value - lim_asc).abs() / lim_asc;
    let q_desc = (r60.descending.value - lim_desc).abs() / lim_desc;
    let limits = q_asc < 0.10 && q_desc < 0.10;
    Outcome {
        pass: small_n && self_consistent && limits,
        detail: format!(
            "n=10 naive vs big jump: asc {} vs {} (z {z_asc:.2}), desc {} vs {} (z {z_desc:.2}); \
             n=30/60 asc {} / {} ({:.1}%), desc {} / {} ({:.1}%); \
             limits asc {lim_asc:.4} ({:.1}% off), desc {lim_desc:.4} ({:.1}% off)",
            fmt(&naive.ascending),
            fmt(&bj10.ascending),
            fmt(&naive.descending),
            fmt(&bj10.descending),
            fmt(&r30.ascending),
            fmt(&r60.ascending),
            100.0 * self_asc,
            fmt(&r30.descending),
            fmt(&r60.descending),
            100.0 * self_desc,
            100.0 * q_asc,
            100.0 * q_desc
        ),
    }
}

fn criterion_5() -> Outcome {
    let model = model();
    let env = Environment::geometric(model);
    let strategy = Strategy::BigJump(ISConfig::default().with_law(JumpIndexLaw::Uniform));
    let mut decreasing = 0;
    let mut pairs = Vec::new();
    for seed in 0..5u64 {
        let s = RandomStreams::new(1050 + seed);
        let p20 = two_jump_prob(&model, 20, 0.5, 5.0, 5.0, 200_000, &strategy, &s.derive("20")).unwrap();
        let p40 = two_jump_prob(&model, 40, 0.5, 5.0, 5.0, 200_000, &strategy, &s.derive("40")).unwrap();
        decreasing += usize::from(p40.value < p20.value);
        pairs.push(format!("{:.2e}>{:.2e}", p20.value, p40.value));
    }
    let is = ISConfig::default();
    let streams = RandomStreams::new(105);
    let k30 = kappa_law(&env, 30, 1_000_000, Some(&is), &streams.derive("30")).unwrap();
    let k60 = kappa_law(&env, 60, 1_000_000, Some(&is), &streams.derive("60")).unwrap();
    let no_jump_down = k60.no_jump.value < k30.no_jump.value;
    let two = k60.two_jump.value;
    Outcome {
        pass: decreasing == 5 && no_jump_down && two < 0.01,
        detail: format!(
            "two-jump n=20>n=40 in {decreasing}/5 seeds [{}]; no-jump mass n=30 {:.2e}, n=60 {:.2e}; two-jump mass n=60 {:.2e}",
            pairs.join(" "),
            k30.no_jump.value,
            k60.no_jump.value,
            two
        ),
    }
}

fn criterion_6() -> Outcome {
    let env = env();
    let streams = RandomStreams::new(106);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let is = ISConfig::default();
    let a = yaglom_omega(&env, &grid, 60, 500_000, Some(&is), &streams.derive("60")).unwrap();
    let b = yaglom_omega(&env, &grid, 120, 500_000, Some(&is), &streams.derive("120")).unwrap();
    let ends = a.omega[0].value == 0.0 && a.omega[10].value == 1.0 && b.omega[0].value == 0.0 && b.omega[10].value == 1.0;
    let monotone = [&a, &b].iter().all(|c| {
        c.omega.windows(2).all(|w| w[1].value >= w[0].value - 2.0 * w[0].stderr.max(w[1].stderr))
    });
    let sup = a.omega.iter().zip(&b.omega).map(|(x, y)| (x.value - y.value).abs()).fold(0.0, f64::max);
    Outcome {
        pass: ends && monotone && sup < 0.02,
        detail: format!(
            "endpoints exact {ends}; nondecreasing {monotone}; Ω(0.5) n=60 {} n=120 {}; sup difference {sup:.4}",
            fmt(&a.omega[5]),
            fmt(&b.omega[5])
        ),
    }
}

fn criterion_7() -> Outcome {
    let env = env();
    let streams = RandomStreams::new(107);
    let pi = pi_j(&env, 8, 20_000, &CjOptions::default(), &streams.derive("pi")).unwrap();
    let kappa = kappa_law(&env, 60, 2_000_000, Some(&ISConfig::default()), &streams.derive("kappa")).unwrap();
    let total: f64 = pi.probs.iter().sum();
    let zs: Vec<f64> = (0..8)
        .map(|j| (pi.probs[j] - kappa.masses[j]).abs() / (pi.stderr[j].powi(2) + kappa.stderr[j].powi(2)).sqrt())
        .collect();
    let worst = zs.iter().copied().fold(0.0, f64::max);
    let coords: Vec<String> = (0..8)
        .map(|j| format!("{:.4}/{:.4}(z {:.1})", pi.probs[j], kappa.masses[j], zs[j]))
        .collect();
    Outcome {
        pass: worst <= 4.0 && (total - 1.0).abs() < 1e-12,
        detail: format!("pi/kappa per j: {}; sum pi {total:.15}", coords.join(" ")),
    }
}

fn criterion_8() -> Outcome {
    let env = env();
    let is = ISConfig::default().with_law(JumpIndexLaw::Fixed { index: 1 });
    let jf = jump_fluctuation(&env, 60, 1, 1_000_000, Some(&is), SigmaMeasure::Tilted, &RandomStreams::new(108)).unwrap();
    let zm = jf.mean.value.abs() / jf.mean.stderr;
    let zc = (jf.cdf_at_zero.value - 0.5).abs() / jf.cdf_at_zero.stderr;
    Outcome {
        pass: zm <= 4.0 && zc <= 4.0,
        detail: format!(
            "mean {} (z {zm:.1}); CDF(0) {} (z {zc:.1}); variance {}; ess {:.0}",
            fmt(&jf.mean),
            fmt(&jf.cdf_at_zero),
            fmt(&jf.variance),
            jf.ess
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut differing = Vec::new();
    for exp in [
        Experiment::Validate,
        Experiment::Survival,
        Experiment::WalkDiag,
        Experiment::C0,
        Experiment::Yaglom,
        Experiment::Bigjump,
    ] {
        let mut cfg = RunConfig::defaults(exp);
        cfg.study.samples = 20_000;
        cfg.study.n_list.truncate(1);
        cfg.study.options.j_max = 3;
        cfg.study.options.series_samples = Some(500);
        let one = run(&cfg).unwrap().deterministic_jsonl();
        let again = run(&cfg).unwrap().deterministic_jsonl();
        cfg.batches = 8;
        let eight = run(&cfg).unwrap().deterministic_jsonl();
        if one != again || one != eight {
            differing.push(exp.name());
        }
    }
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            "all six experiments byte-identical across repeats and batches 1 vs 8; \
             invariant suites run as the other test targets"
                .into()
        } else {
            format!("outputs differ for {}", differing.join(", "))
        },
    }
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("BPRE_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "unbiasedness cross-check", criterion_1),
        (2, "exponential rate", criterion_2),
        (3, "polynomial correction constant", criterion_3),
        (4, "walk functionals", criterion_4),
        (5, "one big jump", criterion_5),
        (6, "conditional generating function", criterion_6),
        (7, "conditioned environment", criterion_7),
        (8, "jump fluctuations", criterion_8),
        (9, "reproducibility", criterion_9),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{name}]: {verdict} ({:.0}s) {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} failing: {failed:?}", if failed.is_empty() { "all criteria pass;" } else { "some criteria" });
}
