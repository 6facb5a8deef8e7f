//! Validates the two bundled parameter sets, prints their moment tables and
//! cross-checks the closed forms against quadrature.

use bpre::env_model::{validate, ModelError, ModelParams};

fn main() -> Result<(), ModelError> {
    for (name, params) in [("desk_scale", ModelParams::desk_scale()), ("mild_drift", ModelParams::mild_drift())] {
        let model = validate(params)?;
        let mt = model.moments();
        println!("{name}: {params:?}");
        println!("  m = {:.6}  a = {:.6}  b = {:.6}", mt.m, mt.a, mt.b);
        println!("  Var X = {:.4} (original), {:.4} (tilted)", mt.var_x_orig, mt.var_x_tilted);
        for t in [0.0, params.rho / 2.0, params.rho] {
            println!(
                "  phi({t:.3}) = {:.10}  quadrature {:.10}",
                model.phi(t)?,
                model.phi_quadrature(t)
            );
        }
        let n = 60;
        println!("  b_{n} = {:.4e}  A(an) = {:.4e}", model.b_n(n)?, model.tail_a(model.a() * n as f64)?);
    }

    let heavy = ModelParams { beta: 2.0, ..ModelParams::default() };
    println!("beta = 2: {}", validate(heavy).unwrap_err());
    Ok(())
}
