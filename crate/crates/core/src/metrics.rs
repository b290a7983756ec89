//! Full-reference quality metrics on single-channel planes.

use crate::error::{Error, Result};
use crate::imagio::Plane;

const PEAK: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    /// `f64::INFINITY` for identical planes.
    pub psnr_db: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn measure(a: &Plane, b: &Plane) -> Result<Self> {
        Ok(MetricReport {
            psnr_db: psnr(a, b)?,
            ssim: ssim(a, b)?,
        })
    }
}

fn check_dims(a: &Plane, b: &Plane) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

pub fn mse(a: &Plane, b: &Plane) -> Result<f64> {
    check_dims(a, b)?;
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// `10 log10(255^2 / MSE)`; infinite when the planes are identical.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / err).log10())
}

/// Normalized 11-tap Gaussian with sigma 1.5.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - center;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable "valid" filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..][..w];
        for x in 0..ow {
            horiz[y * ow + x] = k
                .iter()
                .zip(&row[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW)
                .map(|i| k[i] * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows
/// (K1 = 0.01, K2 = 0.03, L = 255).
pub fn ssim(a: &Plane, b: &Plane) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "SSIM needs at least 11x11 pixels, got {w}x{h}"
        )));
    }
    let k = gaussian_window();
    let fa: Vec<f64> = a.data().iter().map(|&v| f64::from(v)).collect();
    let fb: Vec<f64> = b.data().iter().map(|&v| f64::from(v)).collect();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };

    let mu_a = filter_valid(&fa, w, h, &k);
    let mu_b = filter_valid(&fb, w, h, &k);
    let e_aa = filter_valid(&prod(&fa, &fa), w, h, &k);
    let e_bb = filter_valid(&prod(&fb, &fb), w, h, &k);
    let e_ab = filter_valid(&prod(&fa, &fb), w, h, &k);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    Ok(total / n as f64)
}
