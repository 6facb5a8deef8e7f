use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::StudyConfig;

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum OutputRecord {
    Estimate(EstimateRecord),
    Run(RunSummary),
    Truncated { experiment: String, config_hash: String, reason: String, records_written: usize },
}

/// A single estimated (or computed) quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub experiment: String,
    pub config_hash: String,
    pub params_hash: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x: Option<f64>,
    pub samples: u64,
    pub value: f64,
    pub stderr: f64,
    pub seed: u64,
    /// Diagnostics specific to the method.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub extra: Option<serde_json::Value>,
    /// Excluded from the determinism contract.
    pub wall_time_s: f64,
}

/// Closing record of a run; embeds the full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub config_hash: String,
    pub config: StudyConfig,
    pub software_version: String,
    pub stream_algorithm: String,
    pub records: usize,
    /// Excluded from the determinism contract.
    pub wall_time_s: f64,
}

impl OutputRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    /// The JSON line with wall-clock fields removed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("records serialize");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_s");
        }
        v.to_string()
    }
}

/// Streams records to `results.jsonl`, flushing after each line.
pub struct JsonlSink {
    out: BufWriter<File>,
}

impl JsonlSink {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(JsonlSink { out: BufWriter::new(File::create(dir.join("results.jsonl"))?) })
    }

    pub fn write(&mut self, record: &OutputRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", record.to_json_line())?;
        self.out.flush()
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    n: String,
    samples: u64,
    value: f64,
    stderr: f64,
}

/// Writes `summary.csv` keyed by `(method, n)`.
pub fn write_summary(dir: &Path, records: &[EstimateRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(std::io::Error::other)?;
    for r in records {
        let method = match (r.x, r.lambda) {
            (Some(x), _) => format!("{}[x={x}]", r.method),
            _ => r.method.clone(),
        };
        w.serialize(SummaryRow {
            method: &method,
            n: r.n.map(|n| n.to_string()).unwrap_or_default(),
            samples: r.samples,
            value: r.value,
            stderr: r.stderr,
        })
        .map_err(std::io::Error::other)?;
    }
    w.flush()
}
