use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use iaclahe::imagio::{read_image, rgb_to_ycbcr, ImageFormat};
use iaclahe::{MetricReport, Plane, TileGrid};

use super::enhance::{clip_source, enhance_y, ClipSource};
use super::parse_positive;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Args)]
#[command(
    after_help = "Pairs are matched by file stem: `<name>_in.<ext>` is compared with `<name>_gt.<ext>`; \
    extensions may differ. Files without a partner are skipped with a warning."
)]
pub struct EvalArgs {
    /// Directory holding `<name>_in` / `<name>_gt` image pairs.
    #[arg(long)]
    pub dir: PathBuf,
    /// Enhance inputs with this fixed clip limit before scoring.
    #[arg(long, value_parser = parse_positive, conflicts_with = "model")]
    pub clip: Option<f64>,
    /// Enhance inputs with this estimator checkpoint before scoring.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "8x8")]
    pub grid: TileGrid,
    /// CSV destination; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub metrics: MetricReport,
}

#[derive(Default)]
struct Pair {
    input: Option<PathBuf>,
    gt: Option<PathBuf>,
}

fn find_pairs(dir: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut pairs: BTreeMap<String, Pair> = BTreeMap::new();
    for path in entries.filter_map(|e| e.ok().map(|e| e.path())) {
        if !path.is_file() || ImageFormat::from_path(&path).is_none() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        if let Some(name) = stem.strip_suffix("_in") {
            pairs.entry(name.to_owned()).or_default().input = Some(path);
        } else if let Some(name) = stem.strip_suffix("_gt") {
            pairs.entry(name.to_owned()).or_default().gt = Some(path);
        }
    }
    Ok(pairs
        .into_iter()
        .filter_map(|(name, pair)| match pair {
            Pair {
                input: Some(i),
                gt: Some(g),
            } => Some((name, i, g)),
            _ => {
                log::warn!("skipping unmatched pair {name:?}");
                None
            }
        })
        .collect())
}

fn luma(path: &Path) -> CliResult<Plane> {
    Ok(rgb_to_ycbcr(&read_image(path)?).0)
}

fn format_rows(rows: &[EvalRow]) -> String {
    let mut s = String::from("name,psnr_db,ssim\n");
    for r in rows {
        s += &format!(
            "{},{:.4},{:.6}\n",
            r.name, r.metrics.psnr_db, r.metrics.ssim
        );
    }
    let n = rows.len() as f64;
    let psnr = rows.iter().map(|r| r.metrics.psnr_db).sum::<f64>() / n;
    let ssim = rows.iter().map(|r| r.metrics.ssim).sum::<f64>() / n;
    s += &format!("mean,{psnr:.4},{ssim:.6}\n");
    s
}

pub fn run_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<Vec<EvalRow>> {
    let source: Option<ClipSource> = match (args.clip, &args.model) {
        (None, None) => None,
        (clip, model) => Some(clip_source(clip, model.as_deref())?),
    };
    if !args.dir.is_dir() {
        return Err(CliError::Runtime(anyhow!(
            "{} is not a directory",
            args.dir.display()
        )));
    }
    let pairs = find_pairs(&args.dir)?;
    if pairs.is_empty() {
        return Err(CliError::Runtime(anyhow!(
            "no `_in`/`_gt` pairs in {}",
            args.dir.display()
        )));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for (name, input, gt) in pairs {
        let mut y = luma(&input)?;
        let gt = luma(&gt)?;
        if let Some(source) = &source {
            y = enhance_y(&y, args.grid, source)?.0;
        }
        let metrics = MetricReport::measure(&y, &gt).with_context(|| format!("pair {name:?}"))?;
        rows.push(EvalRow { name, metrics });
    }
    let text = format_rows(&rows);
    match &args.output {
        Some(path) => {
            let mut f = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(rows)
}
