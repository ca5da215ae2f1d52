//! `stvu` — space-time video upsampler. Converts a low-resolution,
//! low-frame-rate frame sequence into a spatially x r upsampled sequence
//! with N interpolated frames per input gap, and carries the training,
//! dataset-preparation and evaluation workflows around that model.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stvu_cli::commands::{
    cmd_dump_scores, cmd_evaluate, cmd_prepare, cmd_pretrain, cmd_train, cmd_upsample,
    DumpScoresArgs, EvaluateArgs, PrepareArgs, TrainArgs, UpsampleArgs,
};

#[derive(Parser)]
#[command(
    name = "stvu",
    about = "Joint space-time video upsampling: training, inference and evaluation",
    long_about = None,
    version
)]
struct Cli {
    /// Master seed for all stochastic stages (logged with every run).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Flat key = value configuration file (unknown keys are errors).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override single configuration keys, e.g. --set scale_r=2.
    #[arg(long = "set", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade an HR frame corpus into a self-contained training dataset.
    Prepare {
        /// Directory of HR clip directories (<root>/<clip>/%06d.png).
        #[arg(long)]
        hr_root: PathBuf,
        /// Output dataset root (manifest + meta + hr/ + lr/).
        #[arg(long)]
        out: PathBuf,
        /// Spatial scale factor (2 or 4).
        #[arg(long)]
        scale: Option<usize>,
        /// Gaussian blur sigma.
        #[arg(long)]
        sigma: Option<f64>,
        /// Temporal stride reserving intermediate ground truth.
        #[arg(long)]
        stride: Option<usize>,
        /// Subsampling phase: center | topleft.
        #[arg(long)]
        phase: Option<String>,
    },
    /// Phase 1: optimize the spatial path on the spatial loss.
    Pretrain(TrainCli),
    /// Phase 2: joint training of the whole network (needs --init).
    Train(TrainCli),
    /// Upsample an LR frame directory with a trained checkpoint.
    Upsample {
        /// Input LR frame directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Intermediate frames per input gap (N).
        #[arg(long, default_value_t = 0)]
        n_intermediate: usize,
        /// Write confidence-score heatmaps for a representative window.
        #[arg(long)]
        dump_scores: bool,
        /// Write bidirectional center-pair flow fields (.flo).
        #[arg(long)]
        dump_flows: bool,
    },
    /// Odd/even protocol: score a checkpoint against an HR testset.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        /// HR testset root (directory of clip directories).
        #[arg(long)]
        testset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// none | no-efst | no-d.
        #[arg(long, default_value = "none")]
        ablate: String,
        /// Score on BT.601 luma instead of RGB.
        #[arg(long)]
        luma: bool,
        /// Shave this many border pixels before metrics.
        #[arg(long, default_value_t = 0)]
        crop: usize,
    },
    /// Write confidence-score heatmaps for one input window.
    DumpScores {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// First frame of the window within the clip.
        #[arg(long, default_value_t = 0)]
        window_start: usize,
    },
}

#[derive(clap::Args)]
struct TrainCli {
    /// Prepared dataset root (from `stvu prepare`).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints and loss logs.
    #[arg(long)]
    out: PathBuf,
    /// desk (smoke-scale) or paper (published constants).
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Resume a mid-phase checkpoint (restores schedule and RNG state).
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Joint training only: the pretraining checkpoint to start from.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Joint training only: skip pretraining and start cold.
    #[arg(long)]
    cold_start: bool,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    decay_every: Option<u64>,
    #[arg(long)]
    decay_factor: Option<f64>,
    /// Global-norm gradient clip (0 disables).
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Validate and print the resolved schedule, then exit.
    #[arg(long)]
    dry_run: bool,
}

impl TrainCli {
    fn into_args(self, config: Option<PathBuf>, sets: Vec<String>) -> TrainArgs {
        TrainArgs {
            data: self.data,
            out: self.out,
            preset: self.preset,
            config,
            sets,
            resume: self.resume,
            init: self.init,
            cold_start: self.cold_start,
            iters: self.iters,
            batch: self.batch,
            patch: self.patch,
            lr: self.lr,
            decay_every: self.decay_every,
            decay_factor: self.decay_factor,
            grad_clip: self.grad_clip,
            checkpoint_every: self.checkpoint_every,
            dry_run: self.dry_run,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed;
    let config = cli.config;
    let sets = cli.sets;
    let result = match cli.command {
        Command::Prepare {
            hr_root,
            out,
            scale,
            sigma,
            stride,
            phase,
        } => cmd_prepare(
            &PrepareArgs {
                hr_root,
                out,
                scale,
                sigma,
                stride,
                phase,
                config,
                sets,
            },
            seed,
        ),
        Command::Pretrain(t) => cmd_pretrain(&t.into_args(config, sets), seed),
        Command::Train(t) => cmd_train(&t.into_args(config, sets), seed),
        Command::Upsample {
            input,
            out,
            ckpt,
            n_intermediate,
            dump_scores,
            dump_flows,
        } => cmd_upsample(
            &UpsampleArgs {
                input,
                out,
                ckpt,
                n_intermediate,
                dump_scores,
                dump_flows,
                config,
                sets,
            },
            seed,
        ),
        Command::Evaluate {
            ckpt,
            testset,
            out,
            ablate,
            luma,
            crop,
        } => cmd_evaluate(
            &EvaluateArgs {
                ckpt,
                testset,
                out,
                ablate,
                luma,
                crop,
            },
            seed,
        ),
        Command::DumpScores {
            ckpt,
            input,
            out,
            window_start,
        } => cmd_dump_scores(&DumpScoresArgs {
            ckpt,
            input,
            out,
            window_start,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
