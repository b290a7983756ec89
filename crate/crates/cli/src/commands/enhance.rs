use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{ArgGroup, Args};
use iaclahe::estimator::{estimator_forward, preprocess, EstimatorParams};
use iaclahe::imagio::{
    encode_pgm, read_image, rgb_to_ycbcr, write_image, ycbcr_to_rgb, ImageFormat,
};
use iaclahe::{clahe, ClipLimitMap, Plane, TileGrid};

use super::{load_model, parse_positive};
use crate::error::CliResult;

#[derive(Clone, Debug, Args)]
#[command(group(ArgGroup::new("limit").required(true).args(["clip", "model"])))]
pub struct EnhanceArgs {
    /// Input image (PNG, PPM or PGM).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output image; the format follows the extension (PGM writes luma only).
    #[arg(long, short)]
    pub output: PathBuf,
    /// Tile grid as `<rows>x<cols>`.
    #[arg(long, default_value = "8x8")]
    pub grid: TileGrid,
    /// Fixed clip limit applied to every tile.
    #[arg(long, value_parser = parse_positive)]
    pub clip: Option<f64>,
    /// Estimator checkpoint predicting tile-wise clip limits.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write the clip-limit map as CSV: one line per tile row, no header.
    #[arg(long)]
    pub dump_clip_map: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub enum ClipSource {
    Fixed(f64),
    Model(EstimatorParams),
}

/// Enhances a luma plane and returns it with the clip limits used.
pub fn enhance_y(
    y: &Plane,
    grid: TileGrid,
    source: &ClipSource,
) -> iaclahe::Result<(Plane, ClipLimitMap)> {
    let clip = match source {
        ClipSource::Fixed(c) => ClipLimitMap::uniform(grid, *c)?,
        ClipSource::Model(params) => estimator_forward(&preprocess(y), grid, params)?.0,
    };
    Ok((clahe(y, grid, &clip)?, clip))
}

pub(crate) fn clip_source(clip: Option<f64>, model: Option<&Path>) -> CliResult<ClipSource> {
    Ok(match (clip, model) {
        (Some(c), _) => ClipSource::Fixed(c),
        (None, Some(path)) => ClipSource::Model(load_model(path)?),
        (None, None) => unreachable!("clap enforces exactly one limit source"),
    })
}

pub fn clip_map_csv(map: &ClipLimitMap) -> String {
    let cols = map.grid().cols();
    map.values()
        .chunks(cols)
        .map(|row| {
            row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect()
}

pub fn run_enhance(args: &EnhanceArgs, _out: &mut dyn Write) -> CliResult<()> {
    let source = clip_source(args.clip, args.model.as_deref())?;
    let img = read_image(&args.input)?;
    let (y, cb, cr) = rgb_to_ycbcr(&img);
    let (enhanced, clip) = enhance_y(&y, args.grid, &source)?;
    if ImageFormat::from_path(&args.output) == Some(ImageFormat::Pgm) {
        std::fs::write(&args.output, encode_pgm(&enhanced))
            .with_context(|| format!("writing {}", args.output.display()))?;
    } else {
        write_image(&args.output, &ycbcr_to_rgb(&enhanced, &cb, &cr)?)?;
    }
    if let Some(path) = &args.dump_clip_map {
        std::fs::write(path, clip_map_csv(&clip))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
