use bpre::env_model::{validate, Model, ModelParams};
use bpre::importance::{BigJumpProposal, ISConfig, ISConfigError, JumpIndexLaw, PathSampler};
use bpre::quenched::{EnvPath, Environment};
use bpre::streams::RandomStreams;
use proptest::prelude::*;

fn model() -> Model {
    validate(ModelParams::default()).unwrap()
}

fn binomial_tail(n: usize, p: f64, at_least: usize) -> f64 {
    let mut below = 0.0;
    let mut coef = 1.0;
    for k in 0..at_least {
        below += coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        coef = coef * (n - k) as f64 / (k + 1) as f64;
    }
    1.0 - below
}

fn laws() -> [JumpIndexLaw; 4] {
    [
        JumpIndexLaw::Uniform,
        JumpIndexLaw::Geometric { p: 0.5 },
        JumpIndexLaw::GeometricFromEnd { p: 0.3 },
        JumpIndexLaw::Fixed { index: 2 },
    ]
}

#[test]
fn weights_are_unbiased_for_big_jump_events() {
    let model = model();
    let n = 8;
    let samples = 400_000;
    for law in laws() {
        for jumps in [1usize, 2] {
            if jumps == 2 && matches!(law, JumpIndexLaw::Fixed { .. }) {
                continue;
            }
            let cfg = ISConfig { forced_jumps: jumps, ..ISConfig::default().with_law(law) };
            let prop = BigJumpProposal::new(&model, n, &cfg).unwrap();
            let tail = model.tail_a(prop.threshold()).unwrap();
            let target = binomial_tail(n, tail, jumps);
            let mut rng = RandomStreams::new(jumps as u64).derive(&format!("{law:?}")).block(0);
            let mut xs = Vec::new();
            let (mut total, mut hit, mut hit2) = (0.0, 0.0, 0.0);
            for _ in 0..samples {
                let w = prop.sample_increments(&model, &mut xs, &mut rng);
                assert!(w > 0.0 && w <= prop.weight_bound());
                assert_eq!(w, prop.weight(xs.iter().copied()));
                total += w;
                let big = xs.iter().filter(|&&x| x >= prop.threshold()).count();
                if big >= jumps {
                    hit += w;
                    hit2 += w * w;
                }
            }
            let mean = hit / samples as f64;
            let se = ((hit2 / samples as f64 - mean * mean) / samples as f64).sqrt();
            assert!((mean - target).abs() < 4.0 * se, "{law:?}/{jumps}: {mean} ± {se} vs {target}");
            // E[w] = 1 up to the bounded-weight CLT
            let bound = prop.weight_bound();
            assert!((total / samples as f64 - 1.0).abs() < 4.0 * bound / (samples as f64).sqrt());
        }
    }
}

#[test]
fn pair_draws_follow_the_pair_law() {
    let model = model();
    let n = 4;
    let law = JumpIndexLaw::Geometric { p: 0.4 };
    let cfg = ISConfig { forced_jumps: 2, mixture_weight: 0.99, ..ISConfig::default().with_law(law) };
    let prop = BigJumpProposal::new(&model, n, &cfg).unwrap();
    let pi = law.probabilities(n).unwrap();
    let mut counts = vec![vec![0u64; n]; n];
    let mut rng = RandomStreams::new(9).block(0);
    let mut xs = Vec::new();
    let samples = 200_000u64;
    let mut forced = 0u64;
    for _ in 0..samples {
        prop.sample_increments(&model, &mut xs, &mut rng);
        let big: Vec<usize> = (0..n).filter(|&i| xs[i] >= prop.threshold()).collect();
        if big.len() == 2 {
            counts[big[0]][big[1]] += 1;
            forced += 1;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let p = pi[i] * pi[j] * (1.0 / (1.0 - pi[i]) + 1.0 / (1.0 - pi[j]));
            let f = counts[i][j] as f64 / forced as f64;
            let se = (p * (1.0 - p) / forced as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se + 1e-3, "({i},{j}): {f} vs {p}");
        }
    }
}

#[test]
fn sampler_without_mixture_has_unit_weight() {
    let env = Environment::geometric(model());
    let sampler = PathSampler::new(&env, 10, None).unwrap();
    assert!(sampler.proposal().is_none());
    let mut rng = RandomStreams::new(1).block(0);
    let (mut path, mut xs) = (EnvPath::new(), Vec::new());
    assert_eq!(sampler.fill(&mut path, &mut xs, &mut rng), 1.0);
    assert_eq!(path.len(), 10);

    let mixed = PathSampler::new(&env, 10, Some(&ISConfig::default())).unwrap();
    let w = mixed.fill(&mut path, &mut xs, &mut rng);
    assert_eq!(w, mixed.proposal().unwrap().weight(path.steps().iter().map(|s| s.x())));
}

#[test]
fn invalid_settings() {
    let m = model();
    let bad = |cfg: ISConfig| BigJumpProposal::new(&m, 5, &cfg).unwrap_err();
    assert_eq!(bad(ISConfig { mixture_weight: 1.0, ..Default::default() }), ISConfigError::MixtureWeight(1.0));
    assert_eq!(bad(ISConfig { jump_threshold_delta: 0.0, ..Default::default() }), ISConfigError::Delta(0.0));
    assert_eq!(bad(ISConfig { forced_jumps: 3, ..Default::default() }), ISConfigError::ForcedJumps(3));
    let fixed = ISConfig::default().with_law(JumpIndexLaw::Fixed { index: 6 });
    assert_eq!(bad(fixed), ISConfigError::FixedIndex { index: 6, n: 5 });
    let pair = ISConfig { forced_jumps: 2, ..ISConfig::default().with_law(JumpIndexLaw::Fixed { index: 1 }) };
    assert_eq!(bad(pair), ISConfigError::PairImpossible);
}

fn any_law() -> impl Strategy<Value = JumpIndexLaw> {
    prop_oneof![
        Just(JumpIndexLaw::Uniform),
        (0.01f64..=1.0).prop_map(|p| JumpIndexLaw::Geometric { p }),
        (0.01f64..=1.0).prop_map(|p| JumpIndexLaw::GeometricFromEnd { p }),
        (1usize..30).prop_map(|index| JumpIndexLaw::Fixed { index }),
    ]
}

proptest! {
    #[test]
    fn index_laws_are_distributions(law in any_law(), n in 1usize..40) {
        if let Ok(p) = law.probabilities(n) {
            prop_assert_eq!(p.len(), n);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut r = law.reversed(n).probabilities(n).unwrap();
            r.reverse();
            for (a, b) in p.iter().zip(&r) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weight_never_exceeds_bound(
        xs in proptest::collection::vec(-50.0f64..200.0, 1..30),
        w in 0.01f64..0.99,
        jumps in 1usize..=2,
    ) {
        let m = model();
        let cfg = ISConfig { mixture_weight: w, forced_jumps: jumps, ..ISConfig::default().with_law(JumpIndexLaw::Uniform) };
        if let Ok(prop) = BigJumpProposal::new(&m, xs.len(), &cfg) {
            let weight = prop.weight(xs.iter().copied());
            prop_assert!(weight > 0.0 && weight <= prop.weight_bound() * (1.0 + 1e-15));
        }
    }
}
