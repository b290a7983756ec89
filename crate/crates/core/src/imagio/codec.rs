//! PNG (8-bit gray/RGB) and binary PNM (P5/P6) codecs.

use std::io::Cursor;
use std::path::Path;

use super::{rgb_to_ycbcr, Plane, RgbImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
    Pgm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "ppm" => Some(ImageFormat::Ppm),
            "pgm" => Some(ImageFormat::Pgm),
            _ => None,
        }
    }
}

/// Decodes a PNG, P6 PPM or P5 PGM stream, sniffing the format from its
/// magic bytes. Gray images are replicated into three channels.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(Error::Decode {
            offset: 0,
            message: "unrecognized magic bytes".into(),
        })
    }
}

pub fn encode_image(img: &RgbImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(img),
        ImageFormat::Ppm => Ok(encode_ppm(img)),
        ImageFormat::Pgm => Ok(encode_pgm(&rgb_to_ycbcr(img).0)),
    }
}

pub fn read_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Writes `img` in the format implied by the file extension.
pub fn write_image(path: &Path, img: &RgbImage) -> Result<()> {
    let format = ImageFormat::from_path(path).ok_or_else(|| {
        Error::UnsupportedFormat(format!("cannot infer format from {}", path.display()))
    })?;
    let bytes = encode_image(img, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut cursor = Cursor::new(bytes);
    let result = read_png_frame(&mut cursor);
    result.map_err(|err| match err {
        PngFailure::Format(msg) => Error::UnsupportedFormat(msg),
        PngFailure::Decoding(e) => Error::Decode {
            offset: cursor.position(),
            message: e.to_string(),
        },
    })
}

enum PngFailure {
    Format(String),
    Decoding(png::DecodingError),
}

impl From<png::DecodingError> for PngFailure {
    fn from(e: png::DecodingError) -> Self {
        PngFailure::Decoding(e)
    }
}

fn read_png_frame(cursor: &mut Cursor<&[u8]>) -> std::result::Result<RgbImage, PngFailure> {
    let mut decoder = png::Decoder::new(cursor);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info()?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(PngFailure::Format(format!(
            "{depth:?} bit PNG; only 8-bit is supported"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| PngFailure::Format("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(PngFailure::Format("unexpanded palette".into())),
    };
    // Alpha, when present, is dropped.
    let mut data = Vec::with_capacity(w * h * 3);
    for row in buf.chunks(stride).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            if channels < 3 {
                data.extend_from_slice(&[px[0], px[0], px[0]]);
            } else {
                data.extend_from_slice(&px[..3]);
            }
        }
    }
    RgbImage::new(w, h, data).map_err(|e| PngFailure::Format(e.to_string()))
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::UnsupportedFormat(format!("png encode: {e}")))?;
        writer
            .write_image_data(img.data())
            .map_err(|e| Error::UnsupportedFormat(format!("png encode: {e}")))?;
    }
    Ok(out)
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend_from_slice(plane.data());
    out
}

struct PnmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmHeader<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Decode {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        digits.parse().map_err(|_| Error::Decode {
            offset: start as u64,
            message: format!("{what} out of range"),
        })
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<RgbImage> {
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    let mut hdr = PnmHeader { bytes, pos: 2 };
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(hdr.err(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PNM maxval {maxval}; only 8-bit is supported"
        )));
    }
    match bytes.get(hdr.pos) {
        Some(b) if b.is_ascii_whitespace() => hdr.pos += 1,
        _ => return Err(hdr.err("expected whitespace before raster")),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| hdr.err("image dimensions overflow"))?;
    let raster = &bytes[hdr.pos..];
    if raster.len() < needed {
        return Err(Error::Decode {
            offset: bytes.len() as u64,
            message: format!("truncated raster: {} of {needed} bytes", raster.len()),
        });
    }
    let raster = &raster[..needed];
    let scale = |v: u8| -> u8 {
        if maxval == 255 {
            v
        } else {
            ((f64::from(v.min(maxval as u8)) * 255.0 / maxval as f64).round()) as u8
        }
    };
    let data = if channels == 3 {
        raster.iter().map(|&v| scale(v)).collect()
    } else {
        raster
            .iter()
            .flat_map(|&v| {
                let v = scale(v);
                [v, v, v]
            })
            .collect()
    };
    RgbImage::new(width, height, data)
}
