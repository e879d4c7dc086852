use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use twistbench::config::{ExperimentConfig, Task};
use twistbench::runner::{exit_code_for, init_threads, run, EXIT_CONFIG};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Geometry,
    Solve,
    Verify,
    Convergence,
}

impl From<Command> for Task {
    fn from(c: Command) -> Task {
        match c {
            Command::Geometry => Task::Geometry,
            Command::Solve => Task::Solve,
            Command::Verify => Task::Verify,
            Command::Convergence => Task::Convergence,
        }
    }
}

/// Spacelike graphs in twisted product spacetimes.
#[derive(Debug, Parser)]
#[command(name = "twistbench", version)]
struct Cli {
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> twistbench::Result<i32> {
    init_threads()?;
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    let task = Task::from(cli.command);
    if cfg.task != task {
        return Err(twistbench::Error::Config(format!(
            "subcommand {} does not match config task {}",
            task.name(),
            cfg.task.name()
        )));
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let outcome = run(&cfg)?;
    println!("{}", outcome.message);
    Ok(outcome.exit_code)
}
