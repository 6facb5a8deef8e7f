//! Survival probabilities from four estimators, then the normalized decay
//! `P(Z_n > 0) / (m^n b_n)` at larger horizons.

use bpre::env_model::{validate, ModelParams};
use bpre::estimators::{quenched_mean, survival_naive, survival_tilted, DEFAULT_CAP};
use bpre::importance::ISConfig;
use bpre::quenched::Environment;
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = validate(ModelParams::default())?;
    let env = Environment::geometric(model);
    let streams = RandomStreams::new(2);
    let is = ISConfig::default();
    let samples = 200_000;
    for n in [3, 5, 8] {
        let s = streams.derive_index(n as u64);
        let naive = survival_naive(&env, n, samples, DEFAULT_CAP, &s.derive("naive"));
        let qm = quenched_mean(&env, n, samples, &s.derive("quenched"));
        let tilted = survival_tilted(&env, n, samples, None, &s.derive("tilted"))?;
        let mixed = survival_tilted(&env, n, samples, Some(&is), &s.derive("mixture"))?;
        println!("n = {n}");
        for e in [&naive.estimate, &qm, &tilted, &mixed] {
            println!("  {:<24} {:.4e} ± {:.2e}", e.method, e.value, e.stderr);
        }
    }
    println!("{:>4} {:>12} {:>10}", "n", "P(Z_n>0)", "/ m^n b_n");
    for n in [20, 40, 80] {
        let e = survival_tilted(&env, n, samples, Some(&is), &streams.derive("decay").derive_index(n as u64))?;
        let norm = model.m().powi(n as i32) * model.b_n(n)?;
        println!("{n:>4} {:>12.4e} {:>10.4}", e.value, e.value / norm);
    }
    Ok(())
}
