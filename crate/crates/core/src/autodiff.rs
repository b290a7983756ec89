//! Gradients of an image loss with respect to the clip-limit map.
//!
//! The forward pass is the real-valued CLAHE of [`crate::clahe`] with every
//! intermediate kept on a [`Tape`]. The backward pass runs the chain
//!
//! ```text
//! dL/dY  -> dL/dLUT   bilinear blend transpose, routed by pixel intensity
//!        -> dL/dh'    CDF transpose: suffix sums scaled by P / N_pix
//!        -> dL/dC'    clipped bins: 1, unclipped bins: -#{h > C'} / N_bin
//!        -> dL/dC     times N_pix / N_bin
//! ```
//!
//! The map from `C` to the output is piecewise linear. Its kinks sit where a
//! normalized limit equals some bin count; there the clipped set is decided
//! by `C' <= h` and the excess slope by `h > C'`, so a bin tied with the
//! limit is clipped but adds nothing to the slope.

use crate::clahe::{
    forward_parts, ClipLimitMap, LutGrid, PaddedPlane, TileBlend, TileGrid, TileHistograms,
    MAX_INTENSITY, N_BINS,
};
use crate::error::{Error, Result};
use crate::imagio::{Plane, RealPlane};

/// Forward intermediates needed by [`clahe_backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    pub padded: PaddedPlane,
    pub raw: TileHistograms,
    /// Normalized limits `C'`, row-major per tile.
    pub c_prime: Vec<f64>,
    /// Excess `S` per tile.
    pub excess: Vec<f64>,
    /// `C' <= h(p)`, laid out like the histograms.
    pub clip_mask: Vec<bool>,
    /// `#{p : h(p) > C'}` per tile.
    pub n_exceeding: Vec<usize>,
    /// Unrounded tables.
    pub luts: LutGrid,
    pub blend: TileBlend,
}

impl Tape {
    pub fn grid(&self) -> TileGrid {
        self.padded.grid
    }

    pub fn n_pix(&self) -> usize {
        self.padded.n_pix()
    }

    pub fn clip_mask(&self, row: usize, col: usize) -> &[bool] {
        let k = row * self.grid().cols() + col;
        &self.clip_mask[k * N_BINS..(k + 1) * N_BINS]
    }

    /// Tiles whose limit would meet a bin count when `C` moves by `±eps`.
    pub fn kinks_within(&self, eps: f64) -> Vec<(usize, usize)> {
        let delta = eps * self.n_pix() as f64 / N_BINS as f64;
        let cols = self.grid().cols();
        let mut tiles = Vec::new();
        for (k, (hist, &limit)) in self.raw.tiles().zip(&self.c_prime).enumerate() {
            if hist
                .iter()
                .any(|&h| (limit - delta..=limit + delta).contains(&h))
            {
                tiles.push((k / cols, k % cols));
            }
        }
        tiles
    }
}

/// `dL/dC` per tile, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipGrad {
    pub grid: TileGrid,
    pub values: Vec<f64>,
}

impl ClipGrad {
    pub fn zeros(grid: TileGrid) -> Self {
        ClipGrad {
            grid,
            values: vec![0.0; grid.n_tiles()],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.cols() + col]
    }
}

/// Unrounded CLAHE output (values in `[0, P]`, original dimensions) and its
/// tape. Rounding the output reproduces [`crate::clahe::clahe`] exactly.
pub fn clahe_forward_tape(p: &Plane, g: TileGrid, c: &ClipLimitMap) -> Result<(RealPlane, Tape)> {
    let parts = forward_parts(p, g, c)?;
    let output =
        crate::clahe::apply_luts_real(&parts.padded, &parts.luts, crate::clahe::Blend::Bilinear)?;
    let mut clip_mask = Vec::with_capacity(parts.raw.counts.len());
    let mut n_exceeding = Vec::with_capacity(g.n_tiles());
    for (hist, &limit) in parts.raw.tiles().zip(&parts.c_prime) {
        clip_mask.extend(hist.iter().map(|&h| limit <= h));
        n_exceeding.push(hist.iter().filter(|&&h| h > limit).count());
    }
    let blend = TileBlend::new(&parts.padded);
    let tape = Tape {
        padded: parts.padded,
        raw: parts.raw,
        c_prime: parts.c_prime,
        excess: parts.excess,
        clip_mask,
        n_exceeding,
        luts: parts.luts,
        blend,
    };
    Ok((output, tape))
}

/// Mean absolute error and its gradient `sign(y - gt) / n` (with `sign(0) = 0`).
pub fn l1_loss(y: &RealPlane, gt: &Plane) -> Result<(f64, RealPlane)> {
    if y.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            actual: y.dims(),
        });
    }
    let n = y.data().len() as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(y.data().len());
    for (&a, &b) in y.data().iter().zip(gt.data()) {
        let d = a - f64::from(b);
        sum += d.abs();
        grad.push(if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        });
    }
    Ok((sum / n, RealPlane::new(y.width(), y.height(), grad)?))
}

/// `dL/dC` given the tape and the upstream gradient `dL/dY` over the
/// original (unpadded) image. Padding pixels receive no gradient.
pub fn clahe_backward(t: &Tape, dy: &RealPlane) -> Result<ClipGrad> {
    let pp = &t.padded;
    if dy.dims() != (pp.orig_w, pp.orig_h) {
        return Err(Error::DimensionMismatch {
            expected: (pp.orig_w, pp.orig_h),
            actual: dy.dims(),
        });
    }
    let g = t.grid();
    let cols = g.cols();
    let width = pp.plane.width();

    let mut d_lut = vec![0.0; g.n_tiles() * N_BINS];
    for y in 0..pp.orig_h {
        let (r0, r1, fy) = (t.blend.y.lo[y], t.blend.y.hi[y], t.blend.y.frac[y]);
        let pixels = &pp.plane.data()[y * width..][..pp.orig_w];
        let grads = &dy.data()[y * pp.orig_w..][..pp.orig_w];
        for (x, (&p, &gy)) in pixels.iter().zip(grads).enumerate() {
            if gy == 0.0 {
                continue;
            }
            let p = p as usize;
            let (c0, c1, fx) = (t.blend.x.lo[x], t.blend.x.hi[x], t.blend.x.frac[x]);
            let top = (1.0 - fy) * gy;
            let bot = fy * gy;
            d_lut[(r0 * cols + c0) * N_BINS + p] += (1.0 - fx) * top;
            d_lut[(r0 * cols + c1) * N_BINS + p] += fx * top;
            d_lut[(r1 * cols + c0) * N_BINS + p] += (1.0 - fx) * bot;
            d_lut[(r1 * cols + c1) * N_BINS + p] += fx * bot;
        }
    }

    let cdf_scale = MAX_INTENSITY as f64 / t.n_pix() as f64;
    let limit_scale = t.n_pix() as f64 / N_BINS as f64;
    let values = d_lut
        .chunks_exact(N_BINS)
        .zip(t.clip_mask.chunks_exact(N_BINS))
        .zip(&t.n_exceeding)
        .map(|((d_table, mask), &n_exceeding)| {
            let unclipped_slope = -(n_exceeding as f64) / N_BINS as f64;
            let mut suffix = 0.0;
            let mut d_limit = 0.0;
            for p in (0..N_BINS).rev() {
                suffix += d_table[p];
                let d_hist = cdf_scale * suffix;
                d_limit += d_hist * if mask[p] { 1.0 } else { unclipped_slope };
            }
            d_limit * limit_scale
        })
        .collect();
    Ok(ClipGrad { grid: g, values })
}

fn real_loss(p: &Plane, g: TileGrid, c: &ClipLimitMap, gt: &Plane) -> Result<(f64, RealPlane)> {
    let (out, _) = clahe_forward_tape(p, g, c)?;
    let (loss, _) = l1_loss(&out, gt)?;
    Ok((loss, out))
}

/// Central finite differences of the L1 loss against `gt`, perturbing one
/// clip limit at a time by `±eps`.
///
/// Fails with [`Error::KinkCrossing`] if, for any tile, the perturbation
/// moves a normalized limit across a bin count or flips the sign of any
/// pixel's residual; in either case the loss is not linear over the
/// stencil and the difference quotient is not a derivative.
pub fn finite_diff_clip_grad(
    p: &Plane,
    g: TileGrid,
    c: &ClipLimitMap,
    gt: &Plane,
    eps: f64,
) -> Result<ClipGrad> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {eps}"
        )));
    }
    let (_, tape) = clahe_forward_tape(p, g, c)?;
    let mut kinks = tape.kinks_within(eps);
    let mut values = Vec::with_capacity(g.n_tiles());
    for row in 0..g.rows() {
        for col in 0..g.cols() {
            let base = c.get(row, col);
            if base - eps <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "step {eps} exceeds clip limit {base} at tile ({row}, {col})"
                )));
            }
            let (up, out_up) = real_loss(p, g, &c.with_value(row, col, base + eps)?, gt)?;
            let (down, out_down) = real_loss(p, g, &c.with_value(row, col, base - eps)?, gt)?;
            let flips = out_up
                .data()
                .iter()
                .zip(out_down.data())
                .zip(gt.data())
                .any(|((&a, &b), &t)| {
                    let t = f64::from(t);
                    (a - t).signum() != (b - t).signum() || a == t || b == t
                });
            if flips && !kinks.contains(&(row, col)) {
                kinks.push((row, col));
            }
            values.push((up - down) / (2.0 * eps));
        }
    }
    if !kinks.is_empty() {
        kinks.sort_unstable();
        return Err(Error::KinkCrossing { tiles: kinks });
    }
    Ok(ClipGrad { grid: g, values })
}
