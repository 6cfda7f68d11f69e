use std::path::PathBuf;
use std::process::ExitCode;

use cimsim_cli::{run, Format, Overrides};
use clap::{Args, Parser, Subcommand};

/// Behavioral SRAM compute-in-memory experiments.
#[derive(Parser)]
#[command(name = "cimsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CSNR of an analog macro over a grid of fan-in, ADC bits and noise.
    CsnrSweep(Common),
    /// Error and area of approximate adder trees.
    DatEval(Common),
    /// Error of the probabilistic MAC estimators versus fan-in.
    ProbEval(Common),
    /// Known-zero ADC bits and a losslessness check per input popcount.
    SparsityEval(Common),
    /// Error and conversions of hybrid macros across boundaries.
    HybridSweep(Common),
    /// Network accuracy versus layer CSNR.
    NetEval(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo trials per point, overriding the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Write the CSV here and a JSON summary next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the report on stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::CsnrSweep(a) => ("csnr-sweep", a),
        Command::DatEval(a) => ("dat-eval", a),
        Command::ProbEval(a) => ("prob-eval", a),
        Command::SparsityEval(a) => ("sparsity-eval", a),
        Command::HybridSweep(a) => ("hybrid-sweep", a),
        Command::NetEval(a) => ("net-eval", a),
    };
    let overrides = Overrides {
        seed: args.seed,
        trials: args.trials,
        out: args.out,
        format: args.format,
    };
    match run(kind, &args.config, overrides) {
        Ok(outcome) => {
            print!("{}", outcome.stdout());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
