//! Size of the big jump on survival, centred at `an` and scaled by `σ√n`.

use bpre::env_model::{validate, ModelParams};
use bpre::estimators::{jump_fluctuation, SigmaMeasure};
use bpre::importance::{ISConfig, JumpIndexLaw};
use bpre::quenched::Environment;
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = Environment::geometric(validate(ModelParams::default())?);
    let is = ISConfig::default().with_law(JumpIndexLaw::Fixed { index: 1 });
    let streams = RandomStreams::new(6);
    for n in [30, 60, 120] {
        let jf = jump_fluctuation(&env, n, 1, 100_000, Some(&is), SigmaMeasure::Tilted, &streams.derive_index(n as u64))?;
        println!(
            "n = {n:>3}: mean {:+.3} ± {:.3}, variance {:.3} ± {:.3}, F(0) {:.3} ± {:.3}, ess {:.0}",
            jf.mean.value, jf.mean.stderr, jf.variance.value, jf.variance.stderr, jf.cdf_at_zero.value,
            jf.cdf_at_zero.stderr, jf.ess
        );
        let ecdf = jf.ecdf();
        let q: Vec<String> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|x| format!("{:.3}", ecdf.eval(*x))).collect();
        println!("          F at -2..2: {}", q.join(" "));
    }
    Ok(())
}
