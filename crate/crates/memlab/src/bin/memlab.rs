use clap::{Parser, Subcommand};
use memlab::cli::{list_experiments, load_config, output_dir, run_config, WORKERS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "memlab", version, about = "Run memory-kernel experiments from TOML configs")]
struct Args {
    /// Worker threads for sweep cells (results do not depend on this).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Output directory, overriding the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Print the experiment catalog.
    List,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.cmd {
        Cmd::List => {
            print!("{}", list_experiments());
            ExitCode::SUCCESS
        }
        Cmd::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("memlab: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let dir = output_dir(&cfg, args.out.as_deref());
            match run_config(&cfg, &dir, workers) {
                Ok(o) => {
                    eprintln!("memlab: {} cells, {} failed -> {}", o.cells, o.failed, o.out_dir.display());
                    ExitCode::from(o.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("memlab: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
