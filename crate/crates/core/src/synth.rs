//! Deterministic synthetic gray scenes for smoke training, benchmarks and
//! tests: smooth illumination, soft blobs, a few hard-edged rectangles and
//! fine texture, so local contrast varies across the frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imagio::{quantize, Plane};

struct Blob {
    cx: f64,
    cy: f64,
    r2: f64,
    amp: f64,
}

struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    amp: f64,
}

pub fn synthetic_scene(seed: u64, width: usize, height: usize) -> Result<Plane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gx, gy) = (rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
    let base = rng.random_range(90.0..160.0);
    let blobs: Vec<Blob> = (0..6)
        .map(|_| Blob {
            cx: rng.random_range(0.0..1.0),
            cy: rng.random_range(0.0..1.0),
            r2: rng.random_range(0.005..0.05),
            amp: rng.random_range(-80.0..80.0),
        })
        .collect();
    let rects: Vec<Rect> = (0..4)
        .map(|_| {
            let (x0, y0) = (rng.random_range(0.0..0.8), rng.random_range(0.0..0.8));
            Rect {
                x0,
                y0,
                x1: x0 + rng.random_range(0.05..0.3),
                y1: y0 + rng.random_range(0.05..0.3),
                amp: rng.random_range(-60.0..60.0),
            }
        })
        .collect();
    let (fx, fy) = (rng.random_range(20.0..60.0), rng.random_range(20.0..60.0));
    let tex = rng.random_range(5.0..20.0);

    let (sx, sy) = (1.0 / width as f64, 1.0 / height as f64);
    Plane::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) * sx;
        let v = (y as f64 + 0.5) * sy;
        let mut val = base + gx * (u - 0.5) + gy * (v - 0.5);
        for b in &blobs {
            let d2 = (u - b.cx).powi(2) + (v - b.cy).powi(2);
            val += b.amp * (-d2 / b.r2).exp();
        }
        for r in &rects {
            if (r.x0..r.x1).contains(&u) && (r.y0..r.y1).contains(&v) {
                val += r.amp;
            }
        }
        val += tex * (fx * u).sin() * (fy * v).cos();
        quantize(val)
    })
}
