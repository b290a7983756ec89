//! Full-range BT.601 YCbCr.

use super::{quantize, Plane, RgbImage};
use crate::error::{Error, Result};

pub fn rgb_to_ycbcr(img: &RgbImage) -> (Plane, Plane, Plane) {
    let n = img.width() * img.height();
    let mut y = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for px in img.data().chunks_exact(3) {
        let (r, g, b) = (f64::from(px[0]), f64::from(px[1]), f64::from(px[2]));
        y.push(quantize(0.299 * r + 0.587 * g + 0.114 * b));
        cb.push(quantize(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b));
        cr.push(quantize(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b));
    }
    let (w, h) = (img.width(), img.height());
    // Dimensions come from a valid image, so construction cannot fail.
    (
        Plane::new(w, h, y).expect("valid dims"),
        Plane::new(w, h, cb).expect("valid dims"),
        Plane::new(w, h, cr).expect("valid dims"),
    )
}

pub fn ycbcr_to_rgb(y: &Plane, cb: &Plane, cr: &Plane) -> Result<RgbImage> {
    for other in [cb, cr] {
        if other.dims() != y.dims() {
            return Err(Error::DimensionMismatch {
                expected: y.dims(),
                actual: other.dims(),
            });
        }
    }
    let mut data = Vec::with_capacity(y.data().len() * 3);
    for ((&yv, &cbv), &crv) in y.data().iter().zip(cb.data()).zip(cr.data()) {
        let yv = f64::from(yv);
        let cb = f64::from(cbv) - 128.0;
        let cr = f64::from(crv) - 128.0;
        data.push(quantize(yv + 1.402 * cr));
        data.push(quantize(yv - 0.344136 * cb - 0.714136 * cr));
        data.push(quantize(yv + 1.772 * cb));
    }
    RgbImage::new(y.width(), y.height(), data)
}
