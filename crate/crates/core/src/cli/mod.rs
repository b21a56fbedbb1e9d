//! Command-line entry point: data generation, training, sampling,
//! evaluation, ablation grids, robustness protocol, and latency
//! benchmarking.
//!
//! Exit codes are a stable contract for scripts: 0 success, 2 usage,
//! 3 missing data, 4 shape mismatch, 5 sequence alignment, 1 anything else.

mod ablate;
mod bench;
mod evaluate;
mod gen;
mod manifest;
mod sample;
mod train;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_DATA: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_ALIGNMENT: i32 = 5;

#[derive(Parser)]
#[command(
    name = "agrol",
    version,
    about = "Full-body motion synthesis from sparse head/hand tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic gait dataset.
    GenData {
        /// key = value generation config (count, frames, seed, ranges)
        #[arg(long)]
        config: PathBuf,
        /// output dataset directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the predictive baseline or the diffusion model.
    Train {
        /// mlp | diffusion
        #[arg(long)]
        model: String,
        /// key = value training config
        #[arg(long)]
        config: PathBuf,
        /// dataset directory from gen-data
        #[arg(long)]
        data: PathBuf,
        /// run directory (checkpoint, log, manifest)
        #[arg(long)]
        out: PathBuf,
        /// override the config's timestep mode: none|add|concat|repin
        #[arg(long)]
        timestep_mode: Option<String>,
        /// override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// override the config's total iteration count
        #[arg(long)]
        iters: Option<u64>,
        /// continue from an existing checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the sampler on a sparse-input (or motion) file.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// MSEQ file: 54-channel sparse input, or 132-channel motion with a
        /// root track from which the sparse input is derived
        #[arg(long)]
        input: PathBuf,
        /// DDIM steps
        #[arg(long, default_value_t = 5)]
        ddim_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// output MSEQ path (inside the run directory)
        #[arg(long)]
        out: PathBuf,
        /// comma-separated list of step counts to sweep, e.g. 2,5,10,100,1000
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Compare predictions (or a checkpoint's samples) against ground truth.
    Evaluate {
        /// ground-truth dataset directory
        #[arg(long)]
        gt: PathBuf,
        /// directory of predicted MSEQ files named like the ground truth
        #[arg(long)]
        pred: Option<PathBuf>,
        /// checkpoint to sample predictions from instead of --pred
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// fraction of input frames to zero per trial (tracking loss)
        #[arg(long, default_value_t = 0.0)]
        mask_fraction: f64,
        /// seeded trials to average when masking
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        ddim_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// train | test | all
        #[arg(long, default_value = "all")]
        split: String,
        /// run directory for reports
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure generation latency.
    Bench {
        /// checkpoint to bench; defaults to freshly initialized paper-scale
        /// models
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        ddim_steps: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
    /// Run a toy-scale ablation grid.
    Ablate {
        /// timestep | steps-train | length | blocks | losses | predict-noise
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// override the per-cell training budget
        #[arg(long)]
        iters: Option<u64>,
    },
}

/// Maps an error to the documented exit code.
fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_DATA,
        Error::EmptyDataset => EXIT_MISSING_DATA,
        Error::WidthMismatch { .. }
        | Error::ShapeMismatch { .. }
        | Error::SequenceTooShort { .. }
        | Error::EmptySubset => EXIT_SHAPE,
        Error::LengthMismatch { .. } | Error::CoverageGap { .. } => EXIT_ALIGNMENT,
        _ => EXIT_OTHER,
    }
}

/// Parses argv and runs the selected command, returning the process exit
/// code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; usage problems exit 2, while
            // --help/--version are successes
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::GenData { config, out } => gen::cmd_gen_data(&config, &out),
        Command::Train {
            model,
            config,
            data,
            out,
            timestep_mode,
            seed,
            iters,
            resume,
        } => train::cmd_train(
            &model,
            &config,
            &data,
            &out,
            timestep_mode.as_deref(),
            seed,
            iters,
            resume.as_deref(),
        ),
        Command::Sample {
            checkpoint,
            input,
            ddim_steps,
            seed,
            out,
            sweep,
        } => sample::cmd_sample(&checkpoint, &input, ddim_steps, seed, &out, sweep.as_deref()),
        Command::Evaluate {
            gt,
            pred,
            checkpoint,
            mask_fraction,
            trials,
            ddim_steps,
            seed,
            split,
            out,
        } => evaluate::cmd_evaluate(
            &gt,
            pred.as_deref(),
            checkpoint.as_deref(),
            mask_fraction,
            trials,
            ddim_steps,
            seed,
            &split,
            &out,
        ),
        Command::Bench {
            checkpoint,
            ddim_steps,
            repeats,
            out,
        } => bench::cmd_bench(checkpoint.as_deref(), ddim_steps, repeats, &out),
        Command::Ablate {
            suite,
            config,
            data,
            out,
            seed,
            iters,
        } => ablate::cmd_ablate(&suite, &config, &data, &out, seed, iters),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Renders rows as an aligned plain-text table.
pub(crate) fn format_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: &[String], widths: &[usize]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths.get(i).copied().unwrap_or(c.len())))
            .collect::<Vec<_>>()
            .join("  ")
    };
    out.push_str(&fmt_row(header, &widths));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    out
}
