//! The constant `C₀` from the normalized survival probability and from the
//! series over the position of the big jump.

use bpre::env_model::{validate, ModelParams};
use bpre::estimators::{c0_direct, c0_series, CjOptions};
use bpre::importance::ISConfig;
use bpre::quenched::Environment;
use bpre::streams::RandomStreams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = Environment::geometric(validate(ModelParams::default())?);
    let streams = RandomStreams::new(1);
    for n in [30, 60, 120] {
        let e = c0_direct(&env, n, 200_000, Some(&ISConfig::default()), &streams.derive_index(n as u64))?;
        println!("direct n = {n:>3}: {:.3} ± {:.3}", e.value, e.stderr);
    }
    let series = c0_series(&env, 8, 10_000, &CjOptions::default(), &streams.derive("series"))?;
    for (j, t) in series.terms.iter().enumerate() {
        println!("  term {}: {:.5} ± {:.5}", j + 1, t.value, t.stderr);
    }
    println!(
        "series: {:.3} ± {:.3} ({} terms, last share {:.4})",
        series.estimate.value, series.estimate.stderr, series.j_used, series.last_share
    );
    Ok(())
}
