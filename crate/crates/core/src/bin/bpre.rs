use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use bpre::harness::{parse_config, run_with, write_summary, Experiment, JsonlSink, RunConfig, RunError};
use clap::{Args, Parser, Subcommand};

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

extern "C" fn on_sigint(_: libc::c_int) {
    INTERRUPTED.store(true, Ordering::SeqCst);
}

#[derive(Parser)]
#[command(name = "bpre", version, about = "Rare-event experiments for subcritical branching processes in random environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model and print its moment table.
    Validate(Flags),
    /// Survival probability by naive, quenched-mean and tilted estimators.
    Survival(Flags),
    /// Renewal functions, the walk functionals and two-jump probabilities.
    WalkDiag(Flags),
    /// The constant in front of m^n b_n, by two routes.
    C0(Flags),
    /// Conditional generating function of the surviving population.
    Yaglom(Flags),
    /// Position and size of the big jump on survival.
    Bigjump(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration; defaults are used without it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Horizon; repeat for several.
    #[arg(long = "n")]
    n: Vec<usize>,
    /// Worker threads (does not change the results).
    #[arg(long)]
    batches: Option<usize>,
    /// Output directory for results.jsonl and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Command::Validate(f) => (Experiment::Validate, f),
            Command::Survival(f) => (Experiment::Survival, f),
            Command::WalkDiag(f) => (Experiment::WalkDiag, f),
            Command::C0(f) => (Experiment::C0, f),
            Command::Yaglom(f) => (Experiment::Yaglom, f),
            Command::Bigjump(f) => (Experiment::Bigjump, f),
        }
    }
}

fn load(experiment: Experiment, flags: &Flags) -> Result<RunConfig, String> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let cfg = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if cfg.study.experiment != experiment {
                let msg = format!("config is for `{}`, not `{}`", cfg.study.experiment.name(), experiment.name());
                return Err(msg);
            }
            cfg
        }
        None => RunConfig::defaults(experiment),
    };
    if let Some(s) = flags.seed {
        cfg.study.seed = s;
    }
    if let Some(s) = flags.samples {
        cfg.study.samples = s;
    }
    if !flags.n.is_empty() {
        cfg.study.n_list = flags.n.clone();
    }
    if let Some(b) = flags.batches {
        cfg.batches = b;
    }
    cfg.check().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let (experiment, flags) = Cli::parse().command.split();
    let cfg = match load(experiment, &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = flags.out.clone().or_else(|| cfg.output_dir.clone().map(PathBuf::from));
    let out = out.unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", experiment.name(), cfg.study.hash())));
    let mut sink = match JsonlSink::create(&out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot write to {}: {e}", out.display());
            return ExitCode::from(2);
        }
    };
    // SAFETY: the handler only stores to an atomic.
    unsafe {
        libc::signal(libc::SIGINT, on_sigint as *const () as libc::sighandler_t);
    }
    let mut write = |r: &_| sink.write(r);
    let result = run_with(&cfg, &mut write, &INTERRUPTED);
    match result {
        Ok(res) => {
            if let Err(e) = write_summary(&out, &res.estimates) {
                eprintln!("cannot write summary: {e}");
                return ExitCode::from(3);
            }
            for r in &res.estimates {
                let n = r.n.map(|n| format!(" n={n}")).unwrap_or_default();
                let x = r.x.map(|x| format!(" x={x}")).unwrap_or_default();
                println!("{}{n}{x}: {:.6e} ± {:.2e}", r.method, r.value, r.stderr);
            }
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(RunError::Interrupted { records }) => {
            eprintln!("interrupted; {records} records kept in {}", out.display());
            ExitCode::from(130)
        }
        Err(e) => {
            eprintln!("estimator error: {e}");
            ExitCode::from(3)
        }
    }
}
