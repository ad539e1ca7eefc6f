use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ner::runner::{error_envelope, exit_code, run, Command, OutputFormat, RunOptions};

#[derive(Parser)]
#[command(name = "ner", version, about = "Nuclear electric resonance experiments from a TOML config")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-evolve one driven nucleus and write populations, fidelity and leakage.
    Simulate(Args),
    /// Build a pulse or two-qubit gate schedule and report its fidelity.
    Gate(Args),
    /// Compute the field-gradient response coefficients.
    Efg(Args),
    /// Tabulate the number of coherent flips.
    Perf(Args),
    /// Run `simulate` over a grid of drive and field values.
    Sweep(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Accepted for interface compatibility; every computation is deterministic.
    #[arg(long)]
    seedless: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Gate(a) => (Command::Gate, a),
        Cmd::Efg(a) => (Command::Efg, a),
        Cmd::Perf(a) => (Command::Perf, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    let opts = RunOptions {
        out_dir: args.out,
        format: args.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }),
    };
    match run(command, &args.config, &opts) {
        Ok(outcome) => {
            println!("{}", outcome.message.trim_end());
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_envelope(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
