//! Writes a sampled environment to CSV, reads it back and recomputes the
//! quenched survival probability on the replayed path.

use bpre::env_model::{validate, Measure, ModelParams};
use bpre::quenched::{survival_q, EnvPath, Environment, ThetaLaw};
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = validate(ModelParams::default())?;
    let env = Environment::new(model, ThetaLaw::Uniform { low: 0.5, high: 1.0 })?;
    let path = env.sample_path(12, Measure::Original, &mut RandomStreams::new(8).block(0));

    let file = std::env::temp_dir().join("bpre_environment.csv");
    path.write_csv(std::fs::File::create(&file)?)?;
    let replay = EnvPath::read_csv(std::fs::File::open(&file)?)?;
    println!("{}", std::fs::read_to_string(&file)?.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!("...");
    println!("original 1 - f_0n(0) = {:.6e}", survival_q(&path, 0.0));
    println!("replayed 1 - f_0n(0) = {:.6e}", survival_q(&replay, 0.0));
    Ok(())
}
