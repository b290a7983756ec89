//! Contrast-limited adaptive histogram equalization with a per-tile clip
//! limit map.
//!
//! Stages: edge-replicate the plane to a multiple of the tile grid, count a
//! 256-bin histogram per tile, scale the clip limits into count units, clip
//! each histogram and hand the excess to the bins that stayed under the
//! limit, turn every histogram into a CDF lookup table, then blend the four
//! nearest tables bilinearly around each pixel.
//!
//! Clip limits are multipliers of the mean bin count `N_pix / N_bin`, where
//! `N_pix` is the number of pixels in one (padded) tile. The same `N_pix`
//! normalizes the CDF, so a table tops out below `P` whenever clipping
//! discarded mass.

use std::fmt;

use crate::error::{Error, Result};
use crate::imagio::{quantize, AxisWeights, Plane, RealPlane};

/// Maximum intensity `P`.
pub const MAX_INTENSITY: usize = 255;
/// Histogram bins, one per intensity.
pub const N_BINS: usize = MAX_INTENSITY + 1;

const MAX_GRID_SIDE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TileGrid {
    t_h: usize,
    t_w: usize,
}

impl TileGrid {
    pub fn new(t_h: usize, t_w: usize) -> Result<Self> {
        if !(1..=MAX_GRID_SIDE).contains(&t_h) || !(1..=MAX_GRID_SIDE).contains(&t_w) {
            return Err(Error::InvalidGrid { t_h, t_w });
        }
        Ok(TileGrid { t_h, t_w })
    }

    pub fn square(n: usize) -> Result<Self> {
        TileGrid::new(n, n)
    }

    /// Tile rows.
    pub fn rows(&self) -> usize {
        self.t_h
    }

    /// Tile columns.
    pub fn cols(&self) -> usize {
        self.t_w
    }

    pub fn n_tiles(&self) -> usize {
        self.t_h * self.t_w
    }
}

impl fmt::Display for TileGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.t_h, self.t_w)
    }
}

impl std::str::FromStr for TileGrid {
    type Err = Error;

    /// Parses `"<rows>x<cols>"`, e.g. `"8x8"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidParameter(format!("grid {s:?} is not of the form <rows>x<cols>"));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let h = h.trim().parse().map_err(|_| bad())?;
        let w = w.trim().parse().map_err(|_| bad())?;
        TileGrid::new(h, w)
    }
}

fn check_grid(expected: TileGrid, actual: TileGrid) -> Result<()> {
    if expected != actual {
        return Err(Error::GridMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        });
    }
    Ok(())
}

/// Row-major `t_h x t_w` clip limits, each positive and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipLimitMap {
    grid: TileGrid,
    values: Vec<f64>,
}

impl ClipLimitMap {
    pub fn new(grid: TileGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_tiles() {
            return Err(Error::InvalidParameter(format!(
                "{} clip limits for a {grid} grid",
                values.len()
            )));
        }
        for (k, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidClipLimit {
                    row: k / grid.cols(),
                    col: k % grid.cols(),
                    value,
                });
            }
        }
        Ok(ClipLimitMap { grid, values })
    }

    pub fn uniform(grid: TileGrid, value: f64) -> Result<Self> {
        ClipLimitMap::new(grid, vec![value; grid.n_tiles()])
    }

    pub fn grid(&self) -> TileGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.cols() + col]
    }

    /// Copy with tile `(row, col)` replaced; used by perturbation checks.
    pub fn with_value(&self, row: usize, col: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values[row * self.grid.cols() + col] = value;
        ClipLimitMap::new(self.grid, values)
    }
}

/// A plane padded on the right/bottom by edge replication so every tile has
/// the same `tile_w x tile_h` size.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedPlane {
    pub plane: Plane,
    pub grid: TileGrid,
    pub orig_w: usize,
    pub orig_h: usize,
    pub tile_w: usize,
    pub tile_h: usize,
}

impl PaddedPlane {
    /// Pixels per tile, `N_pix`.
    pub fn n_pix(&self) -> usize {
        self.tile_w * self.tile_h
    }
}

pub fn pad_to_tile_multiple(p: &Plane, g: TileGrid) -> PaddedPlane {
    let (w, h) = p.dims();
    let tile_w = w.div_ceil(g.cols());
    let tile_h = h.div_ceil(g.rows());
    let (pw, ph) = (tile_w * g.cols(), tile_h * g.rows());
    let plane = if (pw, ph) == (w, h) {
        p.clone()
    } else {
        Plane::from_fn(pw, ph, |x, y| p.get(x.min(w - 1), y.min(h - 1))).expect("non-empty")
    };
    PaddedPlane {
        plane,
        grid: g,
        orig_w: w,
        orig_h: h,
        tile_w,
        tile_h,
    }
}

/// Per-tile histograms laid out as `[tile_row][tile_col][bin]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TileHistograms {
    pub grid: TileGrid,
    pub counts: Vec<f64>,
}

impl TileHistograms {
    pub fn tile(&self, row: usize, col: usize) -> &[f64] {
        let k = row * self.grid.cols() + col;
        &self.counts[k * N_BINS..(k + 1) * N_BINS]
    }

    pub fn tiles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.counts.chunks_exact(N_BINS)
    }
}

pub fn compute_tile_histograms(pp: &PaddedPlane, g: TileGrid) -> Result<TileHistograms> {
    check_grid(g, pp.grid)?;
    let mut counts = vec![0u32; g.n_tiles() * N_BINS];
    let width = pp.plane.width();
    for (y, row) in pp.plane.data().chunks_exact(width).enumerate() {
        let tile_row = y / pp.tile_h;
        for (tile_col, span) in row.chunks_exact(pp.tile_w).enumerate() {
            let hist = &mut counts[(tile_row * g.cols() + tile_col) * N_BINS..][..N_BINS];
            for &v in span {
                hist[v as usize] += 1;
            }
        }
    }
    Ok(TileHistograms {
        grid: g,
        counts: counts.into_iter().map(f64::from).collect(),
    })
}

/// `C'_ij = C_ij * N_pix / N_bin`, row-major.
pub fn normalize_clip_limits(c: &ClipLimitMap, n_pix: usize, n_bins: usize) -> Vec<f64> {
    let scale = n_pix as f64 / n_bins as f64;
    c.values().iter().map(|&v| v * scale).collect()
}

/// Result of clipping one histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Redistribution {
    pub hist: Vec<f64>,
    /// Total mass above the limit, `S`.
    pub excess: f64,
    /// Bins with `limit <= h(p)`; these are held at the limit.
    pub n_clipped: usize,
}

/// Clips every bin at `c_prime` and adds `S / N_bin` to each bin that was
/// strictly below the limit. Clipped bins receive no share of the excess,
/// and only a single pass is made.
pub fn clip_and_redistribute(h: &[f64], c_prime: f64) -> Redistribution {
    let n_bins = h.len() as f64;
    let excess: f64 = h.iter().map(|&v| (v - c_prime).max(0.0)).sum();
    let share = excess / n_bins;
    let mut n_clipped = 0;
    let hist = h
        .iter()
        .map(|&v| {
            if c_prime <= v {
                n_clipped += 1;
                c_prime
            } else {
                v + share
            }
        })
        .collect();
    Redistribution {
        hist,
        excess,
        n_clipped,
    }
}

/// Per-tile lookup tables, `[tile_row][tile_col][intensity]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LutGrid {
    pub grid: TileGrid,
    pub tables: Vec<f64>,
}

impl LutGrid {
    pub fn table(&self, row: usize, col: usize) -> &[f64] {
        let k = row * self.grid.cols() + col;
        &self.tables[k * N_BINS..(k + 1) * N_BINS]
    }
}

/// Unrounded tables `P * cumsum(h') / N_pix`. This is the form the
/// differentiable path and [`clahe`] blend.
pub fn build_real_luts(th: &TileHistograms, n_pix: usize) -> LutGrid {
    let (peak, n_pix) = (MAX_INTENSITY as f64, n_pix as f64);
    let mut tables = Vec::with_capacity(th.counts.len());
    for hist in th.tiles() {
        let mut cum = 0.0;
        for &v in hist {
            cum += v;
            // Multiply first: exact for integer CDFs, so ties round like
            // integer equalization.
            tables.push(peak * cum / n_pix);
        }
    }
    LutGrid {
        grid: th.grid,
        tables,
    }
}

/// Integer tables: [`build_real_luts`] rounded to `[0, P]`.
pub fn build_luts(th: &TileHistograms, n_pix: usize) -> LutGrid {
    let mut luts = build_real_luts(th, n_pix);
    for v in &mut luts.tables {
        *v = f64::from(quantize(*v));
    }
    luts
}

/// How a pixel's value is looked up from the tile tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Blend {
    /// Bilinear interpolation between the four surrounding tile centers.
    Bilinear,
    /// Only the table of the tile owning the pixel. Test hook for checking
    /// the tile decomposition against independent per-tile equalization.
    OwnTile,
}

/// Bilinear interpolation taps from pixel coordinates onto tile centers.
/// Coordinates outside the lattice of centers clamp to the border tiles.
#[derive(Clone, Debug)]
pub struct TileBlend {
    pub x: AxisWeights,
    pub y: AxisWeights,
}

impl TileBlend {
    pub fn new(pp: &PaddedPlane) -> Self {
        TileBlend {
            x: AxisWeights::new(pp.grid.cols(), pp.plane.width()),
            y: AxisWeights::new(pp.grid.rows(), pp.plane.height()),
        }
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Blends the tables for every pixel of the original (uncropped) region.
pub fn apply_luts_real(pp: &PaddedPlane, luts: &LutGrid, blend: Blend) -> Result<RealPlane> {
    let mut out = Vec::with_capacity(pp.orig_w * pp.orig_h);
    blend_into(pp, luts, blend, |v| out.push(v))?;
    Ok(RealPlane::new(pp.orig_w, pp.orig_h, out).expect("finite tables give finite output"))
}

/// [`apply_luts_real`] followed by rounding each pixel to `[0, P]`.
pub fn apply_luts(pp: &PaddedPlane, luts: &LutGrid) -> Result<Plane> {
    apply_luts_with(pp, luts, Blend::Bilinear)
}

pub fn apply_luts_with(pp: &PaddedPlane, luts: &LutGrid, blend: Blend) -> Result<Plane> {
    let mut out = Vec::with_capacity(pp.orig_w * pp.orig_h);
    blend_into(pp, luts, blend, |v| out.push(quantize(v)))?;
    Plane::new(pp.orig_w, pp.orig_h, out)
}

fn blend_into(
    pp: &PaddedPlane,
    luts: &LutGrid,
    blend: Blend,
    mut sink: impl FnMut(f64),
) -> Result<()> {
    check_grid(pp.grid, luts.grid)?;
    let cols = luts.grid.cols();
    let table = |row: usize, col: usize| &luts.tables[(row * cols + col) * N_BINS..][..N_BINS];
    let width = pp.plane.width();
    match blend {
        Blend::Bilinear => {
            let taps = TileBlend::new(pp);
            for y in 0..pp.orig_h {
                let (r0, r1, fy) = (taps.y.lo[y], taps.y.hi[y], taps.y.frac[y]);
                let row = &pp.plane.data()[y * width..][..pp.orig_w];
                for (x, &p) in row.iter().enumerate() {
                    let p = p as usize;
                    let (c0, c1, fx) = (taps.x.lo[x], taps.x.hi[x], taps.x.frac[x]);
                    let top = lerp(table(r0, c0)[p], table(r0, c1)[p], fx);
                    let bot = lerp(table(r1, c0)[p], table(r1, c1)[p], fx);
                    sink(lerp(top, bot, fy));
                }
            }
        }
        Blend::OwnTile => {
            for y in 0..pp.orig_h {
                let row = &pp.plane.data()[y * width..][..pp.orig_w];
                for (x, &p) in row.iter().enumerate() {
                    sink(table(y / pp.tile_h, x / pp.tile_w)[p as usize]);
                }
            }
        }
    }
    Ok(())
}

/// Every intermediate of one forward pass.
#[derive(Clone, Debug)]
pub(crate) struct ForwardParts {
    pub padded: PaddedPlane,
    pub raw: TileHistograms,
    pub c_prime: Vec<f64>,
    pub excess: Vec<f64>,
    #[allow(dead_code)] // read by the rounded-table test
    pub redistributed: TileHistograms,
    pub luts: LutGrid,
}

pub(crate) fn forward_parts(p: &Plane, g: TileGrid, c: &ClipLimitMap) -> Result<ForwardParts> {
    check_grid(g, c.grid())?;
    let padded = pad_to_tile_multiple(p, g);
    let raw = compute_tile_histograms(&padded, g)?;
    let n_pix = padded.n_pix();
    let c_prime = normalize_clip_limits(c, n_pix, N_BINS);
    let mut excess = Vec::with_capacity(g.n_tiles());
    let mut counts = Vec::with_capacity(raw.counts.len());
    for (hist, &limit) in raw.tiles().zip(&c_prime) {
        let r = clip_and_redistribute(hist, limit);
        excess.push(r.excess);
        counts.extend(r.hist);
    }
    let redistributed = TileHistograms { grid: g, counts };
    let luts = build_real_luts(&redistributed, n_pix);
    Ok(ForwardParts {
        padded,
        raw,
        c_prime,
        excess,
        redistributed,
        luts,
    })
}

/// CLAHE of `p` on grid `g` with per-tile clip limits `c`.
///
/// Tables stay real-valued through the blend, and each output pixel is
/// rounded once, so this equals the rounded output of
/// [`crate::autodiff::clahe_forward_tape`] exactly.
pub fn clahe(p: &Plane, g: TileGrid, c: &ClipLimitMap) -> Result<Plane> {
    let parts = forward_parts(p, g, c)?;
    apply_luts(&parts.padded, &parts.luts)
}

/// As [`clahe`] but with a selectable blending mode.
pub fn clahe_with(p: &Plane, g: TileGrid, c: &ClipLimitMap, blend: Blend) -> Result<Plane> {
    let parts = forward_parts(p, g, c)?;
    apply_luts_with(&parts.padded, &parts.luts, blend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(h: usize, w: usize) -> TileGrid {
        TileGrid::new(h, w).unwrap()
    }

    #[test]
    fn grid_bounds() {
        assert!(TileGrid::new(0, 1).is_err());
        assert!(TileGrid::new(1, 65).is_err());
        assert!(TileGrid::new(64, 64).is_ok());
        assert_eq!("8x4".parse::<TileGrid>().unwrap(), grid(8, 4));
        assert!("8".parse::<TileGrid>().is_err());
        assert!("0x3".parse::<TileGrid>().is_err());
    }

    #[test]
    fn clip_map_rejects_non_positive() {
        let g = grid(1, 2);
        assert!(matches!(
            ClipLimitMap::new(g, vec![1.0, 0.0]),
            Err(Error::InvalidClipLimit { row: 0, col: 1, .. })
        ));
        assert!(ClipLimitMap::new(g, vec![1.0, f64::NAN]).is_err());
        assert!(ClipLimitMap::new(g, vec![1.0]).is_err());
    }

    #[test]
    fn padding_already_multiple() {
        let p = Plane::from_fn(8, 8, |x, y| (x + 8 * y) as u8).unwrap();
        let pp = pad_to_tile_multiple(&p, grid(2, 2));
        assert_eq!(pp.plane, p);
        assert_eq!((pp.tile_w, pp.tile_h), (4, 4));
    }

    #[test]
    fn padding_replicates_edges() {
        let p = Plane::from_fn(5, 5, |x, y| (x + 10 * y) as u8).unwrap();
        let pp = pad_to_tile_multiple(&p, grid(2, 2));
        assert_eq!(pp.plane.dims(), (6, 6));
        assert_eq!((pp.orig_w, pp.orig_h, pp.tile_w, pp.tile_h), (5, 5, 3, 3));
        for i in 0..6 {
            assert_eq!(pp.plane.get(5, i), pp.plane.get(4, i));
            assert_eq!(pp.plane.get(i, 5), pp.plane.get(i, 4));
        }
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(pp.plane.get(x, y), p.get(x, y));
            }
        }
    }

    #[test]
    fn padding_single_tile_unchanged() {
        let p = Plane::from_fn(7, 3, |x, y| (x * y) as u8).unwrap();
        assert_eq!(pad_to_tile_multiple(&p, grid(1, 1)).plane, p);
    }

    #[test]
    fn constant_histograms() {
        let p = Plane::filled(8, 8, 7).unwrap();
        let g = grid(2, 2);
        let th = compute_tile_histograms(&pad_to_tile_multiple(&p, g), g).unwrap();
        for hist in th.tiles() {
            for (bin, &v) in hist.iter().enumerate() {
                assert_eq!(v, if bin == 7 { 16.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn tiny_histogram() {
        let p = Plane::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let g = grid(1, 1);
        let th = compute_tile_histograms(&pad_to_tile_multiple(&p, g), g).unwrap();
        assert_eq!(&th.tile(0, 0)[..5], &[1.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn histogram_grid_mismatch() {
        let p = Plane::filled(4, 4, 0).unwrap();
        let pp = pad_to_tile_multiple(&p, grid(2, 2));
        assert!(matches!(
            compute_tile_histograms(&pp, grid(1, 1)),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn normalization() {
        let g = grid(1, 1);
        assert_eq!(
            normalize_clip_limits(&ClipLimitMap::uniform(g, 40.0).unwrap(), 4096, 256),
            vec![640.0]
        );
        assert_eq!(
            normalize_clip_limits(&ClipLimitMap::uniform(g, 1.0).unwrap(), 256, 256),
            vec![1.0]
        );
        let one = normalize_clip_limits(&ClipLimitMap::uniform(g, 3.0).unwrap(), 100, 256)[0];
        let two = normalize_clip_limits(&ClipLimitMap::uniform(g, 6.0).unwrap(), 100, 256)[0];
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn no_clipping_below_limit() {
        let r = clip_and_redistribute(&[5.0, 5.0, 5.0, 5.0], 10.0);
        assert_eq!((r.hist, r.excess, r.n_clipped), (vec![5.0; 4], 0.0, 0));
    }

    #[test]
    fn worked_redistribution() {
        let r = clip_and_redistribute(&[10.0, 2.0, 2.0, 2.0], 4.0);
        assert_eq!(r.excess, 6.0);
        assert_eq!(r.hist, vec![4.0, 3.5, 3.5, 3.5]);
        assert_eq!(r.hist.iter().sum::<f64>(), 16.0 - 6.0 / 4.0);
    }

    #[test]
    fn limit_at_or_above_peak() {
        let r = clip_and_redistribute(&[10.0, 2.0, 2.0, 2.0], 12.0);
        assert_eq!((r.hist, r.excess), (vec![10.0, 2.0, 2.0, 2.0], 0.0));
        // A tie clips the bin to itself: no excess and no visible change.
        let r = clip_and_redistribute(&[10.0, 2.0, 2.0, 2.0], 10.0);
        assert_eq!(
            (r.hist, r.excess, r.n_clipped),
            (vec![10.0, 2.0, 2.0, 2.0], 0.0, 1)
        );
    }

    fn single_tile_hist(values: &[f64]) -> TileHistograms {
        TileHistograms {
            grid: grid(1, 1),
            counts: values.to_vec(),
        }
    }

    #[test]
    fn uniform_histogram_gives_ramp() {
        let luts = build_luts(&single_tile_hist(&[4.0; N_BINS]), 1024);
        for (p, &v) in luts.table(0, 0).iter().enumerate() {
            assert_eq!(v, (255.0 * (p as f64 + 1.0) / 256.0).round());
        }
    }

    #[test]
    fn step_histogram_saturates() {
        let mut h = [0.0; N_BINS];
        h[0] = 64.0;
        assert!(build_luts(&single_tile_hist(&h), 64)
            .table(0, 0)
            .iter()
            .all(|&v| v == 255.0));
    }

    #[test]
    fn worked_lut() {
        let mut h = [0.0; N_BINS];
        h[..4].copy_from_slice(&[4.0, 3.5, 3.5, 3.5]);
        let luts = build_luts(&single_tile_hist(&h), 16);
        assert_eq!(&luts.table(0, 0)[..4], &[64.0, 120.0, 175.0, 231.0]);
        assert_eq!(luts.table(0, 0)[255], 231.0);
    }

    fn identity_luts(g: TileGrid) -> LutGrid {
        let tables = (0..g.n_tiles())
            .flat_map(|_| (0..N_BINS).map(|p| p as f64))
            .collect();
        LutGrid { grid: g, tables }
    }

    #[test]
    fn single_tile_apply_is_plain_lookup() {
        let p = Plane::from_fn(9, 5, |x, y| (x * 17 + y * 3) as u8).unwrap();
        let g = grid(1, 1);
        let pp = pad_to_tile_multiple(&p, g);
        let tables = (0..N_BINS).map(|v| (255 - v) as f64).collect();
        let out = apply_luts(&pp, &LutGrid { grid: g, tables }).unwrap();
        for (o, i) in out.data().iter().zip(p.data()) {
            assert_eq!(*o, 255 - i);
        }
    }

    #[test]
    fn identity_tables_preserve_input() {
        let p = Plane::from_fn(13, 11, |x, y| (x * 19 + y * 7) as u8).unwrap();
        let g = grid(3, 4);
        let pp = pad_to_tile_multiple(&p, g);
        assert_eq!(apply_luts(&pp, &identity_luts(g)).unwrap(), p);
    }

    #[test]
    fn tile_center_uses_own_table() {
        // 3x3 tiles of 5x5 pixels: centers at 2, 7, 12.
        let g = grid(3, 3);
        let p = Plane::filled(15, 15, 9).unwrap();
        let pp = pad_to_tile_multiple(&p, g);
        let blend = TileBlend::new(&pp);
        for (k, c) in [2usize, 7, 12].into_iter().enumerate() {
            assert_eq!(blend.x.frac[c], 0.0);
            assert_eq!(blend.x.lo[c], k);
            assert_eq!(blend.y.frac[c], 0.0);
        }
        let tables = (0..9)
            .flat_map(|t| std::iter::repeat_n(10.0 * t as f64, N_BINS))
            .collect();
        let out = apply_luts(&pp, &LutGrid { grid: g, tables }).unwrap();
        assert_eq!(out.get(7, 7), 40);
        assert_eq!(out.get(12, 2), 20);
        assert_eq!(out.get(2, 12), 60);
    }

    #[test]
    fn constant_plane_stays_constant() {
        let p = Plane::filled(21, 17, 77).unwrap();
        for (g, c) in [(grid(1, 1), 0.5), (grid(3, 2), 4.0), (grid(4, 4), 100.0)] {
            let out = clahe(&p, g, &ClipLimitMap::uniform(g, c).unwrap()).unwrap();
            let first = out.data()[0];
            assert!(out.data().iter().all(|&v| v == first));
        }
    }

    #[test]
    fn clip_map_grid_must_match() {
        let p = Plane::filled(8, 8, 0).unwrap();
        let c = ClipLimitMap::uniform(grid(2, 2), 1.0).unwrap();
        assert!(matches!(
            clahe(&p, grid(1, 1), &c),
            Err(Error::GridMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn mass_ledger(h in proptest::collection::vec(0u32..500, N_BINS), c in 0.1f64..400.0) {
            let h: Vec<f64> = h.into_iter().map(f64::from).collect();
            let r = clip_and_redistribute(&h, c);
            let n_above = h.iter().filter(|&&v| c <= v).count();
            prop_assert_eq!(n_above, r.n_clipped);
            let lhs: f64 = r.hist.iter().sum();
            let rhs = h.iter().sum::<f64>() - r.excess * n_above as f64 / N_BINS as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn luts_monotone_and_bounded(
            w in 1usize..40, h in 1usize..40, th in 1usize..5, tw in 1usize..5,
            c in 0.05f64..20.0, seed: u64,
        ) {
            let p = Plane::from_fn(w, h, |x, y| {
                let v = seed ^ ((x as u64) << 17) ^ ((y as u64) << 33);
                (v.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 56) as u8
            }).unwrap();
            let g = grid(th, tw);
            let parts = forward_parts(&p, g, &ClipLimitMap::uniform(g, c).unwrap()).unwrap();
            for table in parts.luts.tables.chunks_exact(N_BINS) {
                prop_assert!(table.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(table.iter().all(|&v| (0.0..=255.0 + 1e-9).contains(&v)));
            }
            let rounded = build_luts(&parts.redistributed, parts.padded.n_pix());
            for table in rounded.tables.chunks_exact(N_BINS) {
                prop_assert!(table.windows(2).all(|w| w[0] <= w[1]));
            }
            let out = clahe(&p, g, &ClipLimitMap::uniform(g, c).unwrap()).unwrap();
            prop_assert_eq!(out.dims(), p.dims());
        }
    }
}
