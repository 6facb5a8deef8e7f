//! Simulates populations along a fixed environment and compares the share of
//! surviving runs with the quenched survival probability.

use bpre::env_model::{validate, ModelParams};
use bpre::quenched::{simulate_particles, survival_q, EnvPath};
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    validate(ModelParams::default())?;
    // a favourable environment: one large step in the middle
    let xs = [-0.5, -1.0, 0.3, 4.0, -0.8, -0.2, -1.5, 0.1];
    let path = EnvPath::geometric(&xs);
    let runs = 200_000;
    let mut rng = RandomStreams::new(3).block(0);
    let (mut alive, mut capped) = (0u64, 0u64);
    for _ in 0..runs {
        match simulate_particles(&path, 1, 1_000_000, &mut rng) {
            Ok(z) => alive += u64::from(z > 0),
            Err(_) => capped += 1,
        }
    }
    let p = alive as f64 / runs as f64;
    let se = (p * (1.0 - p) / runs as f64).sqrt();
    println!("simulated P(Z_n > 0) = {p:.5} ± {se:.5} ({capped} capped)");
    println!("quenched  1 - f_0n(0) = {:.5}", survival_q(&path, 0.0));
    Ok(())
}
