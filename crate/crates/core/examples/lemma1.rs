//! The exponential walk functionals at growing horizons, estimated with the
//! big-jump proposal and compared with their renewal-function limits.

use bpre::env_model::{validate, ModelParams};
use bpre::importance::ISConfig;
use bpre::streams::RandomStreams;
use bpre::walk::{estimate_renewal, lemma1_ratio, predicted_naive_hits, renewal_laplace, Renewal, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = validate(ModelParams::default())?;
    let streams = RandomStreams::new(5);
    let lambda = 1.0;
    let grid: Vec<f64> = (0..=60).map(|i| i as f64 * 0.5).collect();
    let u = estimate_renewal(&model, Renewal::U, &grid, 400, 40_000, &streams.derive("u"))?;
    let neg: Vec<f64> = grid.iter().map(|x| -x).collect();
    let v = estimate_renewal(&model, Renewal::V, &neg, 400, 40_000, &streams.derive("v"))?;
    println!("limits: ascending {:.4}, descending {:.4}", renewal_laplace(&u, lambda), renewal_laplace(&v, lambda));

    let strategy = Strategy::BigJump(ISConfig::default());
    for n in [10, 30, 60] {
        let est = lemma1_ratio(&model, lambda, n, 200_000, &strategy, &streams.derive_index(n as u64))?;
        println!(
            "n = {n:>3}: ascending {:.4} ± {:.4}, descending {:.4} ± {:.4}",
            est.ascending.value, est.ascending.stderr, est.descending.value, est.descending.stderr
        );
    }
    println!("naive sampling at n = 10 would see {:.1} big jumps in 1e6 paths", predicted_naive_hits(&model, 10, 1_000_000));
    Ok(())
}
