//! Generating function of the population size given survival, at two
//! horizons.

use bpre::env_model::{validate, ModelParams};
use bpre::estimators::yaglom_omega;
use bpre::importance::ISConfig;
use bpre::quenched::Environment;
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = Environment::geometric(validate(ModelParams::default())?);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let streams = RandomStreams::new(4);
    let is = ISConfig::default();
    let a = yaglom_omega(&env, &grid, 60, 100_000, Some(&is), &streams.derive("60"))?;
    let b = yaglom_omega(&env, &grid, 120, 100_000, Some(&is), &streams.derive("120"))?;
    println!("{:>4} {:>18} {:>18}", "s", "n = 60", "n = 120");
    for (i, s) in grid.iter().enumerate() {
        let (x, y) = (&a.omega[i], &b.omega[i]);
        println!("{s:>4.1} {:>9.5} ± {:.5} {:>9.5} ± {:.5}", x.value, x.stderr, y.value, y.stderr);
    }
    // P(Z_n = 1 | Z_n > 0) is the slope at 0
    println!("P(Z = 1 | survival) ~ {:.3}", a.omega[1].value / grid[1]);
    Ok(())
}
