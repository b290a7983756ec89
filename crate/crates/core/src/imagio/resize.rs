//! Bilinear resampling with align-corners-false sampling and edge clamping.

use super::RealPlane;

/// One-dimensional sampling taps: output index `o` reads
/// `(1 - frac[o]) * in[lo[o]] + frac[o] * in[hi[o]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisWeights {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub frac: Vec<f64>,
}

impl AxisWeights {
    pub fn new(input_len: usize, output_len: usize) -> Self {
        let scale = input_len as f64 / output_len as f64;
        let last = input_len - 1;
        let mut lo = Vec::with_capacity(output_len);
        let mut hi = Vec::with_capacity(output_len);
        let mut frac = Vec::with_capacity(output_len);
        for o in 0..output_len {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, last as f64);
            let l = (src.floor() as usize).min(last);
            lo.push(l);
            hi.push((l + 1).min(last));
            frac.push(src - l as f64);
        }
        AxisWeights { lo, hi, frac }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

/// Separable bilinear resize from `(in_w, in_h)` to `(out_w, out_h)`.
///
/// Kept as an explicit operator so callers that need the adjoint (the clip
/// limit estimator resizes its local map to the tile grid) can apply
/// [`ResizeWeights::transpose`] with exactly the same taps.
#[derive(Clone, Debug, PartialEq)]
pub struct ResizeWeights {
    pub in_w: usize,
    pub in_h: usize,
    pub x: AxisWeights,
    pub y: AxisWeights,
}

impl ResizeWeights {
    pub fn new(in_w: usize, in_h: usize, out_w: usize, out_h: usize) -> Self {
        ResizeWeights {
            in_w,
            in_h,
            x: AxisWeights::new(in_w, out_w),
            y: AxisWeights::new(in_h, out_h),
        }
    }

    pub fn out_w(&self) -> usize {
        self.x.len()
    }

    pub fn out_h(&self) -> usize {
        self.y.len()
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.in_w * self.in_h, "resize input length");
        let (ow, oh) = (self.out_w(), self.out_h());
        let mut out = Vec::with_capacity(ow * oh);
        for oy in 0..oh {
            let fy = self.y.frac[oy];
            let r0 = &input[self.y.lo[oy] * self.in_w..][..self.in_w];
            let r1 = &input[self.y.hi[oy] * self.in_w..][..self.in_w];
            for ox in 0..ow {
                let (x0, x1, fx) = (self.x.lo[ox], self.x.hi[ox], self.x.frac[ox]);
                let top = lerp(r0[x0], r0[x1], fx);
                let bot = lerp(r1[x0], r1[x1], fx);
                out.push(lerp(top, bot, fy));
            }
        }
        out
    }

    /// Adjoint of [`apply`](Self::apply): scatters an output-sized gradient
    /// back onto the input grid.
    pub fn transpose(&self, grad_out: &[f64]) -> Vec<f64> {
        let (ow, oh) = (self.out_w(), self.out_h());
        assert_eq!(grad_out.len(), ow * oh, "resize gradient length");
        let mut grad_in = vec![0.0; self.in_w * self.in_h];
        for oy in 0..oh {
            let fy = self.y.frac[oy];
            let (y0, y1) = (self.y.lo[oy], self.y.hi[oy]);
            for ox in 0..ow {
                let g = grad_out[oy * ow + ox];
                let (x0, x1, fx) = (self.x.lo[ox], self.x.hi[ox], self.x.frac[ox]);
                grad_in[y0 * self.in_w + x0] += (1.0 - fy) * (1.0 - fx) * g;
                grad_in[y0 * self.in_w + x1] += (1.0 - fy) * fx * g;
                grad_in[y1 * self.in_w + x0] += fy * (1.0 - fx) * g;
                grad_in[y1 * self.in_w + x1] += fy * fx * g;
            }
        }
        grad_in
    }
}

// Exact on constant inputs, unlike the `(1 - t) * a + t * b` form.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

pub fn resize_bilinear(p: &RealPlane, out_w: usize, out_h: usize) -> RealPlane {
    assert!(out_w >= 1 && out_h >= 1, "resize target must be non-empty");
    if p.dims() == (out_w, out_h) {
        return p.clone();
    }
    let weights = ResizeWeights::new(p.width(), p.height(), out_w, out_h);
    RealPlane::new(out_w, out_h, weights.apply(p.data())).expect("finite input gives finite output")
}
