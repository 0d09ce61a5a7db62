//! Config-driven experiment runner behind the `memlab` binary.
//!
//! A run reads one TOML file, fills experiment defaults, executes every
//! sweep cell on a fixed-size thread pool and writes `results.csv`,
//! `summary.json` and `resolved_config.toml` into the output directory.
//! Output bytes depend only on the config, never on the worker count.

pub mod config;
pub mod experiments;
pub mod table;

pub use config::{Experiment, ExperimentConfig, ModelSpec, Numeric, OptimizerKind, Sweep};
pub use table::{Field, Table};

use crate::error::{Error, Result};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

pub const WORKERS_ENV: &str = "MEMLAB_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub cells: usize,
    pub failed: usize,
    pub summary: Value,
}

impl RunOutcome {
    /// 0 on success or partial failure, 1 when every cell failed.
    pub fn exit_code(&self) -> i32 {
        if self.cells > 0 && self.failed == self.cells {
            1
        } else {
            0
        }
    }
}

/// One line per experiment.
pub fn list_experiments() -> String {
    Experiment::ALL.iter().map(|e| format!("{:<17} {}\n", e.name(), e.describe())).collect()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).and_then(ExperimentConfig::resolve)
}

/// Output directory: explicit override, then the config's `output`, then
/// `out/<experiment>`.
pub fn output_dir(cfg: &ExperimentConfig, overridden: Option<&Path>) -> PathBuf {
    overridden
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// Runs a resolved config and writes its artifacts.
pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let out = pool.install(|| experiments::execute(cfg))?;

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let write = |name: &str, body: &str| -> Result<()> {
        let p = out_dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        std::fs::write(&p, body).map_err(|e| io_err(&p, e))
    };
    write("resolved_config.toml", &cfg.to_toml())?;
    write("results.csv", &out.table.to_csv())?;
    for (name, body) in &out.files {
        write(name, body)?;
    }
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!(cfg.experiment.name()));
    summary.insert("seed".into(), json!(cfg.seed));
    summary.insert("cells".into(), json!(out.cells));
    summary.insert("failed".into(), json!(out.failed));
    for (k, v) in out.summary {
        summary.insert(k, v);
    }
    let summary = Value::Object(summary);
    let mut text = serde_json::to_string_pretty(&summary).expect("json");
    text.push('\n');
    write("summary.json", &text)?;
    Ok(RunOutcome { out_dir: out_dir.to_path_buf(), cells: out.cells, failed: out.failed, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_every_experiment() {
        let text = list_experiments();
        assert_eq!(text.lines().count(), 10);
        assert!(text.lines().any(|l| l.starts_with("plateau-2d") && l.contains("ln(1/delta)")));
        assert!(text.contains("ito-check"));
    }

    #[test]
    fn loss_check_regression_value() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::parse("experiment = \"loss-check\"\n").unwrap().resolve().unwrap();
        let o = run_config(&cfg, dir.path(), 2).unwrap();
        assert_eq!(o.exit_code(), 0);
        assert!((o.summary["loss"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-9);
        for f in ["results.csv", "summary.json", "resolved_config.toml"] {
            assert!(dir.path().join(f).exists());
        }
    }

    #[test]
    fn quadratic_output_is_worker_independent() {
        let cfg = ExperimentConfig::parse("experiment = \"quadratic-escape\"\n").unwrap().resolve().unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_config(&cfg, a.path(), 1).unwrap();
        run_config(&cfg, b.path(), 3).unwrap();
        for f in ["results.csv", "summary.json", "resolved_config.toml"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }
}
