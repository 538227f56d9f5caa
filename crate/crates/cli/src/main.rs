use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stefan_cli::config::RunConfig;
use stefan_cli::run::{bench, run, RunReport};
use stefan_cli::{load_config, CliError};

#[derive(Debug, Parser)]
#[command(name = "stefan", version, about = "Stochastic Stefan moving-boundary simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the mode named in the config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Probe the model coefficients for assumption violations.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the acceptance suite and print its results table.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `mode.n_paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides `mode.workers`.
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.solver.seed = s;
        }
        if let Some(o) = self.out {
            cfg.output.dir = o;
        }
        if let Some(p) = self.paths {
            cfg.mode.n_paths = p;
        }
        if let Some(w) = self.workers {
            cfg.mode.workers = w;
        }
        cfg.validate()
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn execute(cli: Cli) -> Result<RunReport, CliError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            run(&cfg)
        }
        Command::Validate { config, overrides } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            cfg.mode.kind = stefan_cli::config::ModeKind::Validate;
            run(&cfg)
        }
        Command::Bench { out, workers } => {
            let workers = workers.unwrap_or_else(default_workers);
            if workers == 0 {
                return Err(CliError::Usage("--workers must be at least 1".into()));
            }
            bench(out.as_deref(), workers)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
