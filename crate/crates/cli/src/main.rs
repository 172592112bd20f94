use clap::{Parser, Subcommand};

use noisydet_cli::commands::{self, CensusArgs, EvalFrocArgs, InjectNoiseArgs, MineArgs, NmsArgs};

/// Simulates bounding-box annotation noise, measures the label noise it
/// induces on detector anchors, and evaluates detections with FROC/AFROC
/// and bootstrap confidence intervals. All commands are deterministic
/// given their seeds.
#[derive(Debug, Parser)]
#[command(name = "noisydet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enlarge ground-truth boxes with clamped-normal multiplicative noise
    InjectNoise(InjectNoiseArgs),
    /// Count positive anchors per lesion across criteria and noise levels
    Census(CensusArgs),
    /// FROC curve, AFROC, and optional case-level bootstrap intervals
    EvalFroc(EvalFrocArgs),
    /// Build the hard-sample mining pool and sample training ROIs
    Mine(MineArgs),
    /// Greedy per-image non-maximum suppression
    Nms(NmsArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::InjectNoise(args) => commands::inject_noise(args),
        Command::Census(args) => commands::census(args),
        Command::EvalFroc(args) => commands::eval_froc(args),
        Command::Mine(args) => commands::mine(args),
        Command::Nms(args) => commands::nms(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
