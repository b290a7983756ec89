use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::Args;
use iaclahe::estimator::{estimator_forward, preprocess, EstimatorParams};
use iaclahe::synth::synthetic_scene;
use iaclahe::{clahe, ClipLimitMap, Plane, TileGrid};

use super::{load_model, parse_positive};
use crate::error::{CliError, CliResult};

pub const MIN_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const FULL_HD: Resolution = Resolution {
        width: 1920,
        height: 1080,
    };
    pub const UHD: Resolution = Resolution {
        width: 3840,
        height: 2160,
    };
}

impl FromStr for Resolution {
    type Err = String;

    /// `<width>x<height>`, e.g. `1920x1080`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().ok().filter(|&v| v > 0);
        match s.split_once(['x', 'X']) {
            Some((w, h)) => match (parse(w), parse(h)) {
                (Some(width), Some(height)) => Ok(Resolution { width, height }),
                _ => Err(format!("invalid resolution {s:?}")),
            },
            None => Err(format!("expected <width>x<height>, got {s:?}")),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    /// Frame size; 1920x1080 and 3840x2160 are the reference settings.
    #[arg(long, default_value = "1920x1080")]
    pub resolution: Resolution,
    /// Timed runs per pipeline (at least 10).
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    /// Untimed runs per pipeline before measuring.
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    /// Seeds the synthetic frame and, without --model, the estimator weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "8x8")]
    pub grid: TileGrid,
    /// Clip limit for the plain CLAHE baseline.
    #[arg(long, default_value_t = 2.0, value_parser = parse_positive)]
    pub clip: f64,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub pipeline: &'static str,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub resolution: Resolution,
    pub iterations: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, pipeline: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.pipeline == pipeline)
    }

    pub fn write_to(&self, out: &mut dyn Write) -> CliResult<()> {
        writeln!(
            out,
            "# {} frame, {} timed iterations",
            self.resolution, self.iterations
        )?;
        writeln!(out, "pipeline,mean_ms,stddev_ms")?;
        for r in &self.rows {
            writeln!(out, "{},{:.3},{:.3}", r.pipeline, r.mean_ms, r.stddev_ms)?;
        }
        Ok(())
    }
}

fn summarize(pipeline: &'static str, samples: &[f64]) -> BenchRow {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    BenchRow {
        pipeline,
        mean_ms: mean,
        stddev_ms: var.sqrt(),
    }
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let value = f();
    (start.elapsed().as_secs_f64() * 1e3, value)
}

/// Runs the three pipelines round-robin on one seeded frame, so slow drift
/// in machine state affects all of them alike.
pub fn run_bench(args: &BenchArgs) -> CliResult<BenchReport> {
    if args.iterations < MIN_ITERATIONS {
        return Err(CliError::Usage(format!(
            "--iterations must be at least {MIN_ITERATIONS}"
        )));
    }
    let params = match &args.model {
        Some(path) => load_model(path)?,
        None => EstimatorParams::default_init(args.seed),
    };
    let Resolution { width, height } = args.resolution;
    let frame: Plane = synthetic_scene(args.seed, width, height)?;
    let fixed = ClipLimitMap::uniform(args.grid, args.clip)?;

    let plain = || clahe(&frame, args.grid, &fixed);
    let estimate = || estimator_forward(&preprocess(&frame), args.grid, &params).map(|(c, _)| c);
    let full = || estimate().and_then(|c| clahe(&frame, args.grid, &c));

    let mut samples = [Vec::new(), Vec::new(), Vec::new()];
    for round in 0..args.warmup + args.iterations {
        let (t_plain, r1) = time_ms(plain);
        let (t_est, r2) = time_ms(estimate);
        let (t_full, r3) = time_ms(full);
        r1?;
        r2?;
        r3?;
        if round >= args.warmup {
            samples[0].push(t_plain);
            samples[1].push(t_est);
            samples[2].push(t_full);
        }
    }
    Ok(BenchReport {
        resolution: args.resolution,
        iterations: args.iterations,
        rows: vec![
            summarize("clahe", &samples[0]),
            summarize("estimator", &samples[1]),
            summarize("ia_clahe", &samples[2]),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_parsing() {
        assert_eq!(
            "1920x1080".parse::<Resolution>().unwrap(),
            Resolution::FULL_HD
        );
        assert_eq!("3840X2160".parse::<Resolution>().unwrap(), Resolution::UHD);
        assert_eq!(Resolution::FULL_HD.to_string(), "1920x1080");
        for bad in ["", "1920", "0x10", "ax5", "1920x1080x3"] {
            assert!(bad.parse::<Resolution>().is_err(), "{bad}");
        }
    }

    #[test]
    fn summary_statistics() {
        let row = summarize("x", &[1.0, 2.0, 3.0]);
        assert_eq!(row.mean_ms, 2.0);
        assert!((row.stddev_ms - 1.0).abs() < 1e-12);
    }
}
