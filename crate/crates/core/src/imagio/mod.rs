//! Image containers, codecs, color conversion and resampling.

mod codec;
mod color;
mod resize;

pub use codec::{
    decode_image, encode_image, encode_pgm, encode_png, encode_ppm, read_image, write_image,
    ImageFormat,
};
pub use color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use resize::{resize_bilinear, AxisWeights, ResizeWeights};

use crate::error::{Error, Result};

/// 8-bit interleaved RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "rgb buffer of {} bytes for {width}x{height} image",
                data.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Replicates a gray plane into all three channels.
    pub fn from_gray(plane: &Plane) -> Self {
        let data = plane.data().iter().flat_map(|&v| [v, v, v]).collect();
        RgbImage {
            width: plane.width(),
            height: plane.height(),
            data,
        }
    }
}

/// Single channel of 8-bit intensities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "plane buffer of {} samples for {width}x{height} plane",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Plane::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn to_real(&self) -> RealPlane {
        RealPlane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Real-valued plane used for interpolation and network activations.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "real plane buffer of {} samples for {width}x{height} plane",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample {bad}")));
        }
        Ok(RealPlane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        RealPlane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        RealPlane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Rounds to the nearest integer (ties up, see [`TIE_SNAP`]) and clamps
    /// to `[0, 255]`.
    pub fn to_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| quantize(v)).collect(),
        }
    }
}

/// Values this close below a half-integer are rounded as the tie itself.
///
/// Exact ties (e.g. 127.5) are common in CLAHE output, and two summation
/// orders can land one ulp on either side of them. Real samples that are
/// not ties lie at least `1 / (2 * pixels)` away, far more than this.
pub const TIE_SNAP: f64 = 1e-9;

pub(crate) fn quantize(v: f64) -> u8 {
    (v + TIE_SNAP).round().clamp(0.0, 255.0) as u8
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "empty image {width}x{height}"
        )));
    }
    Ok(())
}
