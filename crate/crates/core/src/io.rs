//! Grayscale image files.
//!
//! * PGM (`P5`), 8-bit or 16-bit big-endian; written at 16 bits.
//! * PNG, 8-bit or 16-bit grayscale; written at 16 bits.
//! * PFM (`Pf`), 32-bit float grayscale, for data outside [0, 1] such as
//!   log-compressed images.
//!
//! PGM and PNG intensities are scaled to [0, 1] on read; on write, values are
//! clamped to [0, 1] and quantized to 16 bits. The format is chosen by the
//! file's magic bytes on read and by its extension on write.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
    Pfm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            "pfm" => Ok(ImageFormat::Pfm),
            _ => Err(Error::Format(format!(
                "cannot infer format from '{}' (use .pgm, .png or .pfm)",
                path.display()
            ))),
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(img, ImageFormat::from_path(path)?)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"Pf") {
        decode_pfm(bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"PF") {
        Err(Error::Format("colour images are not supported".into()))
    } else {
        Err(Error::Format("unrecognized image header".into()))
    }
}

pub fn encode(img: &Image, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Pgm => Ok(encode_pgm(img)),
        ImageFormat::Png => encode_png(img),
        ImageFormat::Pfm => Ok(encode_pfm(img)),
    }
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Reads whitespace-separated header tokens, skipping `#` comments. Returns
/// the tokens and the offset just past the single whitespace byte that ends
/// the header.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut pos = 0;
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if pos >= bytes.len() {
        return Err(Error::Format("missing image data".into()));
    }
    Ok((tokens, pos + 1))
}

fn parse_dim(s: &str) -> Result<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::Format(format!("bad dimension '{s}'")))
}

fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let (t, start) = header_tokens(bytes, 4)?;
    let (w, h) = (parse_dim(&t[1])?, parse_dim(&t[2])?);
    let maxval: u32 = t[3]
        .parse()
        .ok()
        .filter(|&m| (1..=65535).contains(&m))
        .ok_or_else(|| Error::Format(format!("bad maxval '{}'", t[3])))?;
    let n = w * h;
    let body = &bytes[start..];
    let scale = 1.0 / maxval as f64;
    let data: Vec<f64> = if maxval < 256 {
        if body.len() < n {
            return Err(Error::Format("truncated PGM data".into()));
        }
        body[..n].iter().map(|&b| b as f64 * scale).collect()
    } else {
        if body.len() < 2 * n {
            return Err(Error::Format("truncated PGM data".into()));
        }
        body[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    };
    Image::new(w, h, data)
}

fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(2 * img.len());
    for &v in img.data() {
        out.extend_from_slice(&quantize16(v).to_be_bytes());
    }
    out
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let data: Vec<f64> = match dynimg {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => {
            buf.into_raw().iter().map(|&v| v as f64 / 65535.0).collect()
        }
        other => {
            return Err(Error::Format(format!(
                "only grayscale PNG is supported, got {:?}",
                other.color()
            )))
        }
    };
    Image::new(w, h, data)
}

fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let raw: Vec<u16> = img.data().iter().map(|&v| quantize16(v)).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw)
            .ok_or_else(|| Error::Format("png buffer size mismatch".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    Ok(out.into_inner())
}

// PFM stores rows bottom-to-top; a negative scale means little-endian.
fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let (t, start) = header_tokens(bytes, 4)?;
    let (w, h) = (parse_dim(&t[1])?, parse_dim(&t[2])?);
    let scale: f64 = t[3]
        .parse()
        .ok()
        .filter(|s: &f64| *s != 0.0 && s.is_finite())
        .ok_or_else(|| Error::Format(format!("bad PFM scale '{}'", t[3])))?;
    let little = scale < 0.0;
    let body = &bytes[start..];
    if body.len() < 4 * w * h {
        return Err(Error::Format("truncated PFM data".into()));
    }
    let mut data = vec![0.0; w * h];
    for (k, c) in body[..4 * w * h].chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row, col) = (k / w, k % w);
        data[(h - 1 - row) * w + col] = v as f64;
    }
    Image::new(w, h, data)
}

fn encode_pfm(img: &Image) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(img.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}
