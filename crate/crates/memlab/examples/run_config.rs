//! Runs an experiment config in-process, the same way the `memlab` binary does.

use memlab::cli::{run_config, ExperimentConfig};

fn main() -> memlab::Result<()> {
    let text = r#"
experiment = "rate-sweep"

[sweep]
beta = [1.2, 1.5]
m = [8, 16, 32]
"#;
    let cfg = ExperimentConfig::parse(text)?.resolve()?;
    let dir = std::env::temp_dir().join("memlab-example");
    let out = run_config(&cfg, &dir, 2)?;
    println!("{} cells written to {}", out.cells, out.out_dir.display());
    println!("{:#}", out.summary["fit_log_error_vs_log_m"]);
    Ok(())
}
