use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perfquant_cli::{commands, config::RunConfig};

#[derive(Parser)]
#[command(
    name = "perfquant",
    version,
    about = "DSC-MRI perfusion quantification: phantom synthesis, SVD deconvolution, \
             spatiotemporal-network training and inference, evaluation and benchmarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration (JSON). Inputs are read from its `paths` section.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a phantom volume with known ground-truth maps.
    Phantom(CommonArgs),
    /// Classical truncated-SVD deconvolution over a masked volume.
    Deconv(CommonArgs),
    /// Train the spatiotemporal network on labeled patches.
    Train(CommonArgs),
    /// Whole-volume network inference from a checkpoint.
    Predict(CommonArgs),
    /// Score estimated maps against ground truth.
    Evaluate(CommonArgs),
    /// Threshold a Tmax map into a hypo-perfusion mask.
    Segment(CommonArgs),
    /// Train/evaluate once per value of one hyperparameter.
    Sweep(CommonArgs),
    /// Time both quantification routes per 10,000 voxels.
    Bench(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Phantom(a) => ("phantom", a),
        Command::Deconv(a) => ("deconv", a),
        Command::Train(a) => ("train", a),
        Command::Predict(a) => ("predict", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Segment(a) => ("segment", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Bench(a) => ("bench", a),
    };

    let result = RunConfig::load(&args.config).and_then(|cfg| match name {
        "phantom" => commands::cmd_phantom(&cfg, &args.out),
        "deconv" => commands::cmd_deconv(&cfg, &args.out),
        "train" => commands::cmd_train(&cfg, &args.out),
        "predict" => commands::cmd_predict(&cfg, &args.out),
        "evaluate" => commands::cmd_evaluate(&cfg, &args.out),
        "segment" => commands::cmd_segment(&cfg, &args.out),
        "sweep" => commands::cmd_sweep(&cfg, &args.out),
        "bench" => commands::cmd_bench(&cfg, &args.out),
        _ => unreachable!(),
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e);
            ExitCode::FAILURE
        }
    }
}
