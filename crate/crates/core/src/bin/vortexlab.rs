use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vortexlab::runner::{emit_report, run_experiment, selftest, ExperimentConfig};
use vortexlab::Error;

#[derive(Parser)]
#[command(name = "vortexlab", version, about = "Vortex energy experiments on planar grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write its tables and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` entry.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn report(e: &Error) -> ExitCode {
    match e {
        Error::Validation(msgs) => {
            for m in msgs {
                eprintln!("validation failed: {m}");
            }
        }
        e => eprintln!("error: {e}"),
    }
    ExitCode::from(e.exit_code() as u8)
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: Option<usize>, seed: Option<u64>) -> Result<bool, Error> {
    let mut cfg = load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Validation(vec!["no output directory (pass --out or set output)".into()]))?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Validation(vec!["--threads must be positive".into()]));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Argument(e.to_string()))?;
    }
    let result = run_experiment(&cfg)?;
    for path in emit_report(&result, &out)? {
        println!("wrote {}", path.display());
    }
    for c in result.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    Ok(result.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads, seed } => match run(config, out, threads, seed) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => report(&e),
        },
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("config is valid");
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
