//! Runs one configured experiment with one and with four worker threads and
//! checks that the results are byte-identical.

use bpre::harness::{parse_config, run};

const CONFIG: &str = r#"
experiment = "survival"
n = [3, 5]
samples = 50000
seed = 42

[model]
q_neg = 0.99
lambda_neg = 0.2
beta = 2.5
rho = 0.1
x0 = 0.5

[importance]
mixture_weight = 0.5
jump_threshold_delta = 0.5
forced_jumps = 1
jump_index_law = { law = "geometric", p = 0.5 }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = parse_config(CONFIG)?;
    let one = run(&cfg)?;
    cfg.batches = 4;
    let four = run(&cfg)?;
    for r in &one.estimates {
        println!("{:<26} n={} {:.5e} ± {:.1e}", r.method, r.n.unwrap_or(0), r.value, r.stderr);
    }
    println!("config hash {}", one.summary.config_hash);
    println!("identical output: {}", one.deterministic_jsonl() == four.deterministic_jsonl());
    Ok(())
}
