mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, Output};

#[derive(Parser)]
#[command(name = "qramsim", version, about = "Simulate distillation and teleportation of QRAM resource states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Noisy resource state: fidelity and spectrum.
    ResourceState,
    /// Spectrum of the twirled resource state.
    TwirlSpectrum,
    /// Run one distiller on a source state.
    Distill,
    /// Teleport a random input state through a (noisy) resource state.
    TeleportRun,
    /// The full adaptive protocol.
    Protocol,
    /// Apply the update rule with every classical engine.
    UpdateRule,
    /// Time the classical engines.
    BenchClassical,
    /// Tabulate the cost formulas over a grid.
    Costs,
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let ctx = commands::Context::load(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::ResourceState => commands::resource_state(&ctx),
        Command::TwirlSpectrum => commands::twirl_spectrum(&ctx),
        Command::Distill => commands::distill(&ctx),
        Command::TeleportRun => commands::teleport_run(&ctx),
        Command::Protocol => commands::protocol(&ctx),
        Command::UpdateRule => commands::update_rule(&ctx),
        Command::BenchClassical => commands::bench_classical(&ctx),
        Command::Costs => commands::costs(&ctx),
    }
}

fn emit(cli: &Cli, out: &Output) -> Result<(), CliError> {
    let text = match cli.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.json)
                .map_err(|e| CliError::numerical(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => out
            .csv
            .clone()
            .ok_or_else(|| CliError::config("this subcommand has no CSV output"))?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| emit(&cli, &out).map(|_| out.exit_code));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
