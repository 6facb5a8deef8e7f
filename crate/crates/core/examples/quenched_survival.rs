//! Quenched survival along one sampled environment: the log-space iteration,
//! the closed form for linear-fractional steps and the limit `W`.

use bpre::env_model::{validate, Measure, ModelParams};
use bpre::quenched::{lf_survival, survival_q, w_limit, w_ratio, Environment, WLimitOptions};
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = Environment::geometric(validate(ModelParams::default())?);
    let mut rng = RandomStreams::new(7).block(0);
    let path = env.sample_path(40, Measure::Tilted, &mut rng);

    println!("{:>3} {:>10} {:>14} {:>14} {:>10}", "n", "S_n", "1-f_0n(0)", "closed form", "W_n0");
    for n in [1, 2, 5, 10, 20, 40] {
        let prefix = bpre::quenched::EnvPath::from_steps(path.steps()[..n].iter().copied());
        println!(
            "{n:>3} {:>10.4} {:>14.6e} {:>14.6e} {:>10.6}",
            prefix.s_n(),
            survival_q(&prefix, 0.0),
            lf_survival(&prefix)?,
            w_ratio(&prefix, 0)?,
        );
    }

    let opts = WLimitOptions { record_trace: true, ..Default::default() };
    let w = w_limit(&env, opts, &mut rng);
    println!("W = {:.8} after {} steps (converged: {})", w.value, w.steps, w.converged);
    let tail: Vec<String> = w.trace.iter().step_by(10).take(6).map(|v| format!("{v:.6}")).collect();
    println!("W_n0 every 10 steps: {}", tail.join(" "));
    Ok(())
}
