//! Where the big jump happens on survival: the index of the first large step
//! along surviving paths against the weights derived from the series terms.

use bpre::env_model::{validate, ModelParams};
use bpre::estimators::{kappa_law, pi_j, CjOptions};
use bpre::importance::ISConfig;
use bpre::quenched::Environment;
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = Environment::geometric(validate(ModelParams::default())?);
    let streams = RandomStreams::new(9);
    let n = 60;
    let kappa = kappa_law(&env, n, 200_000, Some(&ISConfig::default()), &streams.derive("kappa"))?;
    let pi = pi_j(&env, 6, 10_000, &CjOptions::default(), &streams.derive("pi"))?;
    println!("{:>2} {:>20} {:>20}", "j", "P(kappa = j)", "pi_j");
    for j in 0..6 {
        println!(
            "{:>2} {:>10.5} ± {:.5} {:>10.5} ± {:.5}",
            j + 1,
            kappa.masses[j],
            kappa.stderr[j],
            pi.probs[j],
            pi.stderr[j]
        );
    }
    println!("no big step: {:.2e}; two big steps: {:.2e}", kappa.no_jump.value, kappa.two_jump.value);
    Ok(())
}
