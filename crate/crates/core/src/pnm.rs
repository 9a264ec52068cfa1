//! Minimal PGM/PPM reader and PGM writer.
//!
//! Reads plain (`P2`, `P3`) and raw (`P5`, `P6`) images with any maxval up
//! to 65535; colour images are converted to luma with BT.601 weights.
//! Writes raw `P5` with maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Image(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// ITU-R BT.601 luma, rounded to the nearest integer.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write_atomic(path, &encode_pgm(img))?;
    Ok(())
}

pub fn read_pnm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    decode_pnm(&bytes).map_err(|e| match e {
        Error::Image(msg) => Error::Image(format!("{}: {msg}", path.display())),
        other => other,
    })
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image(format!("expected a number at byte {start}")))
    }
}

pub fn decode_pnm(data: &[u8]) -> Result<GrayImage> {
    if data.len() < 2 || data[0] != b'P' {
        return Err(Error::Image("not a PNM file".into()));
    }
    let kind = data[1];
    let (channels, raw) = match kind {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        b'6' => (3, true),
        _ => return Err(Error::Image(format!("unsupported PNM type P{}", kind as char))),
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Image(format!("invalid maxval {maxval}")));
    }
    let n = width as usize * height as usize * channels;
    let mut samples = Vec::with_capacity(n);
    if raw {
        // exactly one whitespace byte separates the header from the raster
        cur.pos += 1;
        let bps = if maxval > 255 { 2 } else { 1 };
        let body = data
            .get(cur.pos..cur.pos + n * bps)
            .ok_or_else(|| Error::Image("truncated raster".into()))?;
        if bps == 1 {
            samples.extend(body.iter().map(|&v| u32::from(v)));
        } else {
            samples.extend(body.chunks_exact(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))));
        }
    } else {
        for _ in 0..n {
            samples.push(cur.number()?);
        }
    }
    let scale = |v: u32| -> Result<u8> {
        if v > maxval {
            return Err(Error::Image(format!("sample {v} exceeds maxval {maxval}")));
        }
        if maxval == 255 {
            Ok(v as u8)
        } else {
            Ok((f64::from(v) * 255.0 / f64::from(maxval)).round() as u8)
        }
    };
    let pixels = if channels == 1 {
        samples.into_iter().map(scale).collect::<Result<Vec<_>>>()?
    } else {
        samples
            .chunks_exact(3)
            .map(|c| Ok(luma_bt601(scale(c[0])?, scale(c[1])?, scale(c[2])?)))
            .collect::<Result<Vec<_>>>()?
    };
    GrayImage::new(width, height, pixels)
}
