use std::fmt::Write as _;
use std::io::Write;

use clap::Args;
use iaclahe::autodiff::{clahe_backward, clahe_forward_tape, finite_diff_clip_grad, l1_loss};
use iaclahe::{ClipLimitMap, Error, Plane, TileGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

/// Components whose analytic and numeric values are both this small are
/// judged by absolute error instead of relative error.
pub const NEAR_ZERO: f64 = 1e-8;
const GRIDS: [usize; 3] = [1, 2, 4];
const MAX_SIDE: usize = 64;
const CLIP_RANGE: (f64, f64) = (1.0, 10.0);

#[derive(Clone, Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Central-difference step on each clip limit; must lie in (0, 1).
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Maximum relative error accepted per gradient component.
    #[arg(long = "tol", default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    /// Fresh draws allowed per case before giving up on avoiding kinks.
    #[arg(long, default_value_t = 200)]
    pub max_resamples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseReport {
    pub width: usize,
    pub height: usize,
    pub grid: TileGrid,
    /// Over components that are not near zero.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub resamples: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub cases: Vec<CaseReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.cases.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s =
            String::from("case,width,height,grid,max_rel_err,max_abs_err,resamples,status\n");
        for (i, c) in self.cases.iter().enumerate() {
            let status = if c.passed { "ok" } else { "FAIL" };
            writeln!(
                s,
                "{i},{},{},{},{:.3e},{:.3e},{},{status}",
                c.width, c.height, c.grid, c.max_rel_err, c.max_abs_err, c.resamples
            )
            .unwrap();
        }
        let failed = self.cases.iter().filter(|c| !c.passed).count();
        writeln!(
            s,
            "# {} cases, {failed} above tolerance {:e}, max relative error {:.3e}",
            self.cases.len(),
            self.tolerance,
            self.max_rel_err()
        )
        .unwrap();
        s
    }

    pub fn write_to(&self, out: &mut dyn Write) -> CliResult<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
    let lo = rng.random_range(0..200u32);
    let hi = rng.random_range(lo + 8..=256u32);
    Plane::from_fn(w, h, |_, _| rng.random_range(lo..hi) as u8).expect("non-empty")
}

/// Compares one draw; `None` when the finite difference straddles a kink.
fn check_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> CliResult<Option<CaseReport>> {
    let (w, h) = (
        rng.random_range(4..=MAX_SIDE),
        rng.random_range(4..=MAX_SIDE),
    );
    let grid = TileGrid::square(GRIDS[rng.random_range(0..GRIDS.len())])?;
    let p = random_plane(rng, w, h);
    let gt = Plane::from_fn(w, h, |_, _| rng.random()).expect("non-empty");
    let values = (0..grid.n_tiles())
        .map(|_| rng.random_range(CLIP_RANGE.0..=CLIP_RANGE.1))
        .collect();
    let c = ClipLimitMap::new(grid, values)?;

    let numeric = match finite_diff_clip_grad(&p, grid, &c, &gt, eps) {
        Ok(g) => g,
        Err(Error::KinkCrossing { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let (out, tape) = clahe_forward_tape(&p, grid, &c)?;
    let (_, d_out) = l1_loss(&out, &gt)?;
    let analytic = clahe_backward(&tape, &d_out)?;

    let (mut max_rel, mut max_abs, mut passed) = (0.0f64, 0.0f64, true);
    for (&a, &n) in analytic.values.iter().zip(&numeric.values) {
        let abs = (a - n).abs();
        let scale = a.abs().max(n.abs());
        max_abs = max_abs.max(abs);
        if scale <= NEAR_ZERO {
            passed &= abs <= NEAR_ZERO;
        } else {
            let rel = abs / scale;
            max_rel = max_rel.max(rel);
            passed &= rel <= tol;
        }
    }
    Ok(Some(CaseReport {
        width: w,
        height: h,
        grid,
        max_rel_err: max_rel,
        max_abs_err: max_abs,
        resamples: 0,
        passed,
    }))
}

pub fn run_gradcheck(args: &GradcheckArgs) -> CliResult<GradcheckReport> {
    if !(args.eps > 0.0 && args.eps < CLIP_RANGE.0) {
        return Err(CliError::Usage(format!(
            "--eps must lie in (0, {}), got {}",
            CLIP_RANGE.0, args.eps
        )));
    }
    if args.tolerance.is_nan() || args.tolerance < 0.0 {
        return Err(CliError::Usage(format!(
            "--tol must be non-negative, got {}",
            args.tolerance
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut cases = Vec::with_capacity(args.cases);
    for index in 0..args.cases {
        let mut resamples = 0;
        let report = loop {
            if let Some(report) = check_case(&mut rng, args.eps, args.tolerance)? {
                break report;
            }
            resamples += 1;
            if resamples > args.max_resamples {
                return Err(CliError::Environment(format!(
                    "case {index}: no kink-free draw in {resamples} attempts at eps {}",
                    args.eps
                )));
            }
        };
        cases.push(CaseReport {
            resamples,
            ..report
        });
    }
    Ok(GradcheckReport {
        tolerance: args.tolerance,
        cases,
    })
}
