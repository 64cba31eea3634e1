use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fbse_cli::config::{Format, RunConfig};
use fbse_cli::{cmd_bench, cmd_check, cmd_solve, CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "fbse",
    version,
    about = "Solve, check and benchmark FBSE problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for logs and tables; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Number of runs executed concurrently.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Artifact formats to write; repeat for several. Overrides `formats`.
    #[arg(long = "format", value_enum, global = true)]
    formats: Vec<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every configured instance.
    Solve { config: PathBuf },
    /// Run the invariant checks at the configured scale.
    Check { config: PathBuf },
    /// Run the size grid and write median tables.
    Bench { config: PathBuf },
}

type CommandFn = fn(&RunConfig, Option<usize>, &mut dyn std::io::Write) -> Result<bool, CliError>;

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let overrides = Overrides {
        output_dir: cli.output_dir,
        workers: cli.workers,
        formats: cli
            .formats
            .iter()
            .map(|f| match f {
                FormatArg::Jsonl => Format::Jsonl,
                FormatArg::Csv => Format::Csv,
            })
            .collect(),
    };
    let (path, cmd): (_, CommandFn) = match cli.command {
        Command::Solve { config } => (config, cmd_solve),
        Command::Check { config } => (config, cmd_check),
        Command::Bench { config } => (config, cmd_bench),
    };
    let mut cfg = RunConfig::load(&path)?;
    overrides.apply(&mut cfg);
    cmd(&cfg, overrides.workers, &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fbse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
