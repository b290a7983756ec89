//! Subcommands of the `iaclahe` tool. Each command is a plain function over
//! its parsed arguments and an output sink, so tests can drive them without
//! spawning processes.

pub mod commands;
mod error;

use std::io::Write;

use clap::{Parser, Subcommand};

pub use commands::bench::{run_bench, BenchArgs, BenchReport, BenchRow};
pub use commands::enhance::{enhance_y, ClipSource, EnhanceArgs};
pub use commands::eval::{run_eval, EvalArgs, EvalRow};
pub use commands::gradcheck::{run_gradcheck, CaseReport, GradcheckArgs, GradcheckReport};
pub use commands::train::{run_train, TrainArgs};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "iaclahe",
    version,
    about = "Image-adaptive CLAHE with learned tile-wise clip limits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance one image with a fixed clip limit or a trained estimator.
    Enhance(EnhanceArgs),
    /// Train the clip-limit estimator on a directory of clean images.
    Train(TrainArgs),
    /// Report Y-channel PSNR/SSIM over `<name>_in` / `<name>_gt` image pairs.
    Eval(EvalArgs),
    /// Compare analytic clip-limit gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Time plain CLAHE, estimator inference and full IA-CLAHE.
    Bench(BenchArgs),
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Enhance(args) => commands::enhance::run_enhance(&args, out).map(|()| 0),
        Command::Train(args) => run_train(&args, out).map(|_| 0),
        Command::Eval(args) => run_eval(&args, out).map(|_| 0),
        Command::Gradcheck(args) => run_gradcheck(&args).and_then(|report| {
            report.write_to(out)?;
            Ok(if report.passed() { 0 } else { 1 })
        }),
        Command::Bench(args) => run_bench(&args).and_then(|report| {
            report.write_to(out)?;
            Ok(0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}
