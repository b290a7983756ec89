//! Reference implementations written directly from the definitions, with no
//! code shared with the library's optimized paths. Used by the integration
//! tests here and by the cli acceptance suite.

#![allow(dead_code)]
// Written as explicit loop nests on purpose, unlike the crate under test.
#![allow(clippy::needless_range_loop, clippy::manual_clamp)]

use iaclahe::estimator::{EstimatorParams, FEATURE_SIZE, INPUT_SIZE};
use iaclahe::{ClipLimitMap, Plane, TileGrid};

const P: f64 = 255.0;
const BINS: usize = 256;

/// Nearest integer, ties up; anything within 1e-9 below a half-integer
/// counts as the tie.
fn round_tie_up(v: f64) -> u8 {
    let snapped = v + 1e-9;
    (snapped.floor() as i64 + i64::from(snapped - snapped.floor() >= 0.5)).clamp(0, 255) as u8
}

/// Global histogram equalization in integer arithmetic:
/// `round_half_up(255 * #{q <= v} / N)`.
pub fn global_he(p: &Plane) -> Plane {
    let mut hist = [0u64; BINS];
    for &v in p.data() {
        hist[v as usize] += 1;
    }
    let n = p.data().len() as u64;
    let mut map = [0u8; BINS];
    let mut cum = 0u64;
    for v in 0..BINS {
        cum += hist[v];
        map[v] = ((2 * 255 * cum + n) / (2 * n)) as u8;
    }
    Plane::new(
        p.width(),
        p.height(),
        p.data().iter().map(|&v| map[v as usize]).collect(),
    )
    .unwrap()
}

/// A tile's lookup table built straight from its pixels.
fn tile_table(
    pixel: &impl Fn(usize, usize) -> u8,
    x0: usize,
    y0: usize,
    tw: usize,
    th: usize,
    clip: f64,
) -> Vec<f64> {
    let mut hist = vec![0.0f64; BINS];
    for y in y0..y0 + th {
        for x in x0..x0 + tw {
            hist[pixel(x, y) as usize] += 1.0;
        }
    }
    let n_pix = (tw * th) as f64;
    let limit = clip * n_pix / BINS as f64;
    let mut excess = 0.0;
    for &h in &hist {
        if h > limit {
            excess += h - limit;
        }
    }
    let clipped: Vec<f64> = hist
        .iter()
        .map(|&h| {
            if limit <= h {
                limit
            } else {
                h + excess / BINS as f64
            }
        })
        .collect();
    (0..BINS)
        .map(|v| {
            let cum: f64 = clipped[..=v].iter().sum();
            P * cum / n_pix
        })
        .collect()
}

/// Centers sit at `(j + 0.5) * tile - 0.5`; returns the two neighbouring
/// tile indices and the weight of the second one.
fn bracket(coord: usize, tile: usize, count: usize) -> (usize, usize, f64) {
    let center = |j: usize| (j as f64 + 0.5) * tile as f64 - 0.5;
    let c = coord as f64;
    if c <= center(0) {
        return (0, 0, 0.0);
    }
    if c >= center(count - 1) {
        return (count - 1, count - 1, 0.0);
    }
    let mut j = 0;
    while center(j + 1) <= c {
        j += 1;
    }
    (j, j + 1, (c - center(j)) / tile as f64)
}

/// Per-pixel CLAHE: every pixel re-derives its four tile tables.
pub fn naive_clahe(p: &Plane, g: TileGrid, c: &ClipLimitMap) -> Plane {
    let (w, h) = p.dims();
    let tw = w.div_ceil(g.cols());
    let th = h.div_ceil(g.rows());
    let pixel = |x: usize, y: usize| p.get(x.min(w - 1), y.min(h - 1));
    let mut cache = std::collections::HashMap::new();
    let mut table = |i: usize, j: usize| -> Vec<f64> {
        cache
            .entry((i, j))
            .or_insert_with(|| tile_table(&pixel, j * tw, i * th, tw, th, c.get(i, j)))
            .clone()
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (i0, i1, wy) = bracket(y, th, g.rows());
        for x in 0..w {
            let (j0, j1, wx) = bracket(x, tw, g.cols());
            let v = p.get(x, y) as usize;
            let value = (1.0 - wy) * ((1.0 - wx) * table(i0, j0)[v] + wx * table(i0, j1)[v])
                + wy * ((1.0 - wx) * table(i1, j0)[v] + wx * table(i1, j1)[v]);
            out.push(round_tie_up(value));
        }
    }
    Plane::new(w, h, out).unwrap()
}

/// Unrounded variant of [`naive_clahe`], for tolerance comparisons.
pub fn naive_clahe_real(p: &Plane, g: TileGrid, c: &ClipLimitMap) -> Vec<f64> {
    let (w, h) = p.dims();
    let tw = w.div_ceil(g.cols());
    let th = h.div_ceil(g.rows());
    let pixel = |x: usize, y: usize| p.get(x.min(w - 1), y.min(h - 1));
    let tables: Vec<Vec<Vec<f64>>> = (0..g.rows())
        .map(|i| {
            (0..g.cols())
                .map(|j| tile_table(&pixel, j * tw, i * th, tw, th, c.get(i, j)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (i0, i1, wy) = bracket(y, th, g.rows());
        for x in 0..w {
            let (j0, j1, wx) = bracket(x, tw, g.cols());
            let v = p.get(x, y) as usize;
            out.push(
                (1.0 - wy) * ((1.0 - wx) * tables[i0][j0][v] + wx * tables[i0][j1][v])
                    + wy * ((1.0 - wx) * tables[i1][j0][v] + wx * tables[i1][j1][v]),
            );
        }
    }
    out
}

/// Independent per-tile equalization (no blending), on the padded plane
/// and cropped back.
pub fn per_tile_he(p: &Plane, g: TileGrid, c: &ClipLimitMap) -> Plane {
    let (w, h) = p.dims();
    let tw = w.div_ceil(g.cols());
    let th = h.div_ceil(g.rows());
    let pixel = |x: usize, y: usize| p.get(x.min(w - 1), y.min(h - 1));
    Plane::from_fn(w, h, |x, y| {
        let (i, j) = (y / th, x / tw);
        let table = tile_table(&pixel, j * tw, i * th, tw, th, c.get(i, j));
        round_tie_up(table[p.get(x, y) as usize])
    })
    .unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Loop-nest estimator forward: returns the clip limits on grid `g`.
pub fn naive_estimator(x: &[f64], g: TileGrid, params: &EstimatorParams) -> Vec<f64> {
    let k_count = params.channels();
    let n = FEATURE_SIZE;
    let input = |yy: isize, xx: isize| -> f64 {
        if yy < 0 || xx < 0 || yy >= INPUT_SIZE as isize || xx >= INPUT_SIZE as isize {
            0.0
        } else {
            x[yy as usize * INPUT_SIZE + xx as usize]
        }
    };
    let mut feat = vec![vec![0.0; n]; n];
    for k in 0..k_count {
        for oy in 0..n {
            for ox in 0..n {
                let mut z = 0.0;
                for ky in 0..3 {
                    for kx in 0..3 {
                        z += params.conv3x3[k * 9 + ky * 3 + kx]
                            * input(
                                2 * oy as isize + ky as isize - 1,
                                2 * ox as isize + kx as isize - 1,
                            );
                    }
                }
                let relu6 = (z + 3.0).max(0.0).min(6.0);
                feat[oy][ox] += params.conv1x1[k] * z * relu6 / 6.0;
            }
        }
    }
    let mut mean = 0.0;
    for row in &feat {
        for v in row {
            mean += v;
        }
    }
    mean /= (n * n) as f64;
    let mut z2 = params.fc2_b;
    for hdx in 0..params.hidden() {
        let z1 = params.fc1_w[hdx] * mean + params.fc1_b[hdx];
        z2 += params.fc2_w[hdx] * z1 * sigmoid(z1);
    }
    let global = (1.0 + z2.exp()).ln();

    let sample = |len_in: usize, len_out: usize, o: usize| -> (usize, usize, f64) {
        let src = ((o as f64 + 0.5) * len_in as f64 / len_out as f64 - 0.5).max(0.0);
        let lo = (src.floor() as usize).min(len_in - 1);
        let hi = (lo + 1).min(len_in - 1);
        (
            lo,
            hi,
            if lo == len_in - 1 {
                0.0
            } else {
                src - lo as f64
            },
        )
    };
    let mut out = Vec::with_capacity(g.n_tiles());
    for i in 0..g.rows() {
        let (y0, y1, fy) = sample(n, g.rows(), i);
        for j in 0..g.cols() {
            let (x0, x1, fx) = sample(n, g.cols(), j);
            let s = |yy: usize, xx: usize| sigmoid(feat[yy][xx]);
            let v = (1.0 - fy) * ((1.0 - fx) * s(y0, x0) + fx * s(y0, x1))
                + fy * ((1.0 - fx) * s(y1, x0) + fx * s(y1, x1));
            out.push(global * v);
        }
    }
    out
}
