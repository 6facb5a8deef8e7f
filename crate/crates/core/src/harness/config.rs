use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env_model::{validate, Model, ModelError, ModelParams};
use crate::estimators::{PrefixMeasure, SigmaMeasure};
use crate::importance::ISConfig;
use crate::quenched::{Environment, ThetaLaw};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid model: {0}")]
    Validation(#[from] ModelError),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    Survival,
    WalkDiag,
    C0,
    Yaglom,
    Bigjump,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Survival => "survival",
            Experiment::WalkDiag => "walk-diag",
            Experiment::C0 => "c0",
            Experiment::Yaglom => "yaglom",
            Experiment::Bigjump => "bigjump",
        }
    }

    /// Horizons used when the config gives none.
    pub fn default_horizons(&self) -> Vec<usize> {
        match self {
            Experiment::Validate => vec![],
            Experiment::Survival => vec![3, 5, 8],
            Experiment::WalkDiag => vec![10, 30],
            Experiment::C0 => vec![30, 60, 120],
            Experiment::Yaglom => vec![60],
            Experiment::Bigjump => vec![60],
        }
    }
}

/// Experiment-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Largest series index for `c0_series` and `π̂`.
    pub j_max: usize,
    /// Exponent of the walk functionals.
    pub lambda: f64,
    /// Number of equally spaced points of the Yaglom grid on `[0, 1]`.
    pub s_points: usize,
    /// Renewal series cutoff.
    pub k_max: usize,
    /// Arguments `|x|` at which `U(x)` and `V(-x)` are reported.
    pub renewal_x: Vec<f64>,
    /// Threshold factor of the two-jump probability.
    pub delta: f64,
    pub bound_n: f64,
    pub bound_k: f64,
    /// Population cap of the particle simulation.
    pub cap: u64,
    /// Index `j` of the conditioning event `X_j ≥ an/2`.
    pub jump_index: usize,
    pub sigma: SigmaMeasure,
    pub prefix: PrefixMeasure,
    /// Samples per series term; defaults to a fifth of `samples`.
    pub series_samples: Option<u64>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            j_max: 8,
            lambda: 1.0,
            s_points: 11,
            k_max: 200,
            renewal_x: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0],
            delta: 0.5,
            bound_n: 5.0,
            bound_k: 5.0,
            cap: 1_000_000,
            jump_index: 1,
            sigma: SigmaMeasure::Tilted,
            prefix: PrefixMeasure::Tilted,
            series_samples: None,
        }
    }
}

/// Horizon list accepting either `n = 5` or `n = [5, 10]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Horizons {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    model: ModelParams,
    offspring: Option<ThetaLaw>,
    importance: Option<ISConfig>,
    n: Option<Horizons>,
    samples: Option<u64>,
    seed: Option<u64>,
    batches: Option<usize>,
    #[serde(default)]
    options: Options,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

/// Everything that determines the numbers of a run. Serialized canonically
/// (fixed field order) for hashing and embedded in every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub experiment: Experiment,
    pub model: ModelParams,
    pub offspring: ThetaLaw,
    pub importance: ISConfig,
    pub n_list: Vec<usize>,
    pub samples: u64,
    pub seed: u64,
    pub options: Options,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub study: StudyConfig,
    /// Worker threads; never changes the numbers.
    pub batches: usize,
    pub output_dir: Option<String>,
}

fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

impl StudyConfig {
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    /// Hash of the environment law alone.
    pub fn params_hash(&self) -> String {
        hash_json(&(&self.model, &self.offspring))
    }
}

impl RunConfig {
    /// Defaults for an experiment with the default model.
    pub fn defaults(experiment: Experiment) -> Self {
        RunConfig {
            study: StudyConfig {
                experiment,
                model: ModelParams::default(),
                offspring: ThetaLaw::default(),
                importance: ISConfig::default(),
                n_list: experiment.default_horizons(),
                samples: DEFAULT_SAMPLES,
                seed: DEFAULT_SEED,
                options: Options::default(),
            },
            batches: 1,
            output_dir: None,
        }
    }

    /// Validates every section and returns the environment.
    pub fn check(&self) -> Result<Environment, ConfigError> {
        let model: Model = validate(self.study.model)?;
        let env = Environment::new(model, self.study.offspring).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.study.importance.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let s = &self.study;
        if s.samples < 1 {
            return Err(ConfigError::Invalid("samples must be at least 1".into()));
        }
        if self.batches < 1 {
            return Err(ConfigError::Invalid("batches must be at least 1".into()));
        }
        if s.experiment != Experiment::Validate && s.n_list.is_empty() {
            return Err(ConfigError::Invalid("n must list at least one horizon".into()));
        }
        let o = &s.options;
        if o.j_max < 1 || o.s_points < 2 || o.k_max < 1 || o.jump_index < 1 {
            return Err(ConfigError::Invalid("j_max, k_max, jump_index >= 1 and s_points >= 2 required".into()));
        }
        if !(o.lambda > 0.0) || !(o.delta > 0.0 && o.delta < 1.0) {
            return Err(ConfigError::Invalid("lambda > 0 and delta in (0, 1) required".into()));
        }
        Ok(env)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |sp| line_column(text, sp.start));
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })?;
    let n_list = match raw.n {
        Some(Horizons::One(n)) => vec![n],
        Some(Horizons::Many(v)) => v,
        None => raw.experiment.default_horizons(),
    };
    let cfg = RunConfig {
        study: StudyConfig {
            experiment: raw.experiment,
            model: raw.model,
            offspring: raw.offspring.unwrap_or_default(),
            importance: raw.importance.unwrap_or_default(),
            n_list,
            samples: raw.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            options: raw.options,
        },
        batches: raw.batches.unwrap_or(1),
        output_dir: raw.output.and_then(|o| o.dir),
    };
    cfg.check()?;
    Ok(cfg)
}
