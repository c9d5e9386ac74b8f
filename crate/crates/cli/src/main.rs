use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snapsim_cli::commands::{self, Format, Output};
use snapsim_cli::config::RunConfig;
use snapsim_cli::CliError;

#[derive(Parser, Debug)]
#[command(name = "snapsim", version, about = "Error-corrected SNAP gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run the gate protocol once and report fidelities per outcome.
    SimulateGate,
    /// Wigner function of the encoded state on a grid.
    Wigner,
    /// Randomized benchmarking, optionally interleaved.
    Rb,
    /// Injected-noise sweep with slope extraction.
    Sweep,
    /// Path-independence and error-transparency checks.
    Check,
    /// Analytic error budget.
    Budget,
}

impl Command {
    fn default_format(self) -> Format {
        match self {
            Command::SimulateGate | Command::Check | Command::Budget => Format::Json,
            Command::Wigner | Command::Rb | Command::Sweep => Format::Csv,
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Command::SimulateGate => "simulate_gate",
            Command::Wigner => "wigner",
            Command::Rb => "rb",
            Command::Sweep => "sweep",
            Command::Check => "check",
            Command::Budget => "budget",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let out: Output = match cli.command {
        Command::SimulateGate => commands::simulate_gate(&config)?,
        Command::Wigner => commands::wigner_grid(&config)?,
        Command::Rb => commands::rb(&config)?,
        Command::Sweep => commands::sweep(&config)?,
        Command::Check => commands::check(&config, base)?,
        Command::Budget => commands::budget(&config)?,
    };
    let (fmt, text) = out.render(&config, cli.format.unwrap_or(cli.command.default_format()));
    std::fs::create_dir_all(&cli.out)?;
    let file = cli.out.join(format!("{}.{}", cli.command.stem(), fmt.extension()));
    std::fs::write(&file, text)?;
    println!("{}", out.summary.trim_end());
    println!("wrote {}", file.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("snapsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
