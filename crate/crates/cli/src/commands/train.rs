use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use iaclahe::training::train;
use iaclahe::{EstimatorParams, TileGrid, TrainConfig, TrainLogRecord};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Args)]
pub struct TrainArgs {
    /// Directory of clean PNG/PPM/PGM images (not searched recursively).
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Where the final checkpoint is written.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 17_680)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side of the square training resolution.
    #[arg(long, default_value_t = 640)]
    pub image_size: usize,
    /// Comma-separated tile grids sampled uniformly per iteration.
    #[arg(long, value_delimiter = ',', default_value = "1x1,2x2,4x4,8x8,16x16")]
    pub grids: Vec<TileGrid>,
    /// Histogram-compression range `lo,hi`, inside [-0.5, 0.9].
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-0.5, 0.9], allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    /// Intensity-shift range `lo,hi`, inside [-60, 60].
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-60.0, 60.0], allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub log_every: usize,
    /// CSV log destination; standard output when omitted.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

impl TrainArgs {
    pub fn config(&self) -> CliResult<TrainConfig> {
        let cfg = TrainConfig {
            iterations: self.iterations,
            lr: self.lr,
            seed: self.seed,
            grid_choices: self.grids.clone(),
            alpha_range: (self.alpha[0], self.alpha[1]),
            beta_range: (self.beta[0], self.beta[1]),
            image_size: self.image_size,
            checkpoint_out: Some(self.out.clone()),
            log_every: self.log_every,
            ..TrainConfig::new(&self.data_dir)
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn run_train(args: &TrainArgs, out: &mut dyn Write) -> CliResult<EstimatorParams> {
    let cfg = args.config()?;
    if !args.data_dir.is_dir() {
        return Err(CliError::Runtime(anyhow!(
            "dataset directory {} does not exist",
            args.data_dir.display()
        )));
    }
    // Fail before training, not after it, if the checkpoint cannot be written.
    File::create(&args.out)
        .with_context(|| format!("cannot write checkpoint {}", args.out.display()))?;

    let mut file_sink;
    let sink: &mut dyn Write = match &args.log {
        Some(path) => {
            file_sink = BufWriter::new(
                File::create(path).with_context(|| format!("creating log {}", path.display()))?,
            );
            &mut file_sink
        }
        None => out,
    };
    writeln!(sink, "{}", TrainLogRecord::CSV_HEADER)?;
    let mut write_err = None;
    let params = train(&cfg, |r| {
        if write_err.is_none() {
            write_err = writeln!(sink, "{}", r.to_csv()).err();
        }
    })
    .inspect_err(|_| {
        let _ = std::fs::remove_file(&args.out);
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    sink.flush()?;
    Ok(params)
}
