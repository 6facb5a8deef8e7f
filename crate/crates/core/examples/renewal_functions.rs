//! Renewal functions of the strict ladder epochs of the tilted walk.

use bpre::env_model::{validate, ModelParams};
use bpre::streams::RandomStreams;
use bpre::walk::{estimate_renewal, Renewal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = validate(ModelParams::default())?;
    let streams = RandomStreams::new(11);
    let xs = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0];
    let u = estimate_renewal(&model, Renewal::U, &xs, 400, 50_000, &streams.derive("u"))?;
    let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
    let v = estimate_renewal(&model, Renewal::V, &neg, 400, 50_000, &streams.derive("v"))?;
    println!("{:>6} {:>18} {:>18}", "x", "U(x)", "V(-x)");
    for (pu, pv) in u.points.iter().zip(&v.points) {
        println!(
            "{:>6} {:>10.4} ± {:.4} {:>10.4} ± {:.4}",
            pu.x, pu.value, pu.stderr, pv.value, pv.stderr
        );
    }
    println!("U grows about linearly: U(40)/40 = {:.4}", u.interpolate(40.0) / 40.0);
    Ok(())
}
