//! Binary PGM (P5, maxval 255) I/O.
//!
//! Loading maps byte `v` to `v / 127.5 - 1`, so white (255) is ink (`+1`).
//! Saving clamps to `[-1, 1]` and maps `x` to `round((x + 1) · 127.5)`
//! rounding halves up. With `invert` set, black is ink instead.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Which byte value denotes ink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    WhiteInk,
    BlackInk,
}

impl Polarity {
    pub fn from_invert(invert: bool) -> Self {
        if invert {
            Polarity::BlackInk
        } else {
            Polarity::WhiteInk
        }
    }
}

pub fn byte_to_pixel(v: u8, polarity: Polarity) -> f64 {
    let x = f64::from(v) / 127.5 - 1.0;
    match polarity {
        Polarity::WhiteInk => x,
        Polarity::BlackInk => -x,
    }
}

pub fn pixel_to_byte(x: f64, polarity: Polarity) -> u8 {
    let x = match polarity {
        Polarity::WhiteInk => x,
        Polarity::BlackInk => -x,
    };
    let scaled = (x.clamp(-1.0, 1.0) + 1.0) * 127.5;
    (scaled + 0.5).floor().min(255.0) as u8
}

struct Header {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("missing P5 magic number".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated or non-numeric header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::Format(format!("header value {text} out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("expected whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!(
            "invalid dimensions {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(Error::Format(format!(
            "unsupported maxval {maxval}, expected 255"
        )));
    }
    Ok(Header {
        width,
        height,
        data_offset: pos,
    })
}

/// Decodes a P5 byte stream.
pub fn decode(bytes: &[u8], polarity: Polarity) -> Result<ImageGrid> {
    let header = parse_header(bytes)?;
    let n = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| Error::Format("image too large".into()))?;
    let body = &bytes[header.data_offset..];
    if body.len() < n {
        return Err(Error::Format(format!(
            "expected {n} pixel bytes, found {}",
            body.len()
        )));
    }
    let data = body[..n]
        .iter()
        .map(|&v| byte_to_pixel(v, polarity))
        .collect();
    ImageGrid::new(header.height, header.width, data)
}

/// Encodes an image as a P5 byte stream.
pub fn encode(image: &ImageGrid, polarity: Polarity) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.as_slice().iter().map(|&x| pixel_to_byte(x, polarity)));
    out
}

pub fn read(path: impl AsRef<Path>, polarity: Polarity) -> Result<ImageGrid> {
    decode(&fs::read(path)?, polarity)
}

pub fn write(path: impl AsRef<Path>, image: &ImageGrid, polarity: Polarity) -> Result<()> {
    fs::write(path, encode(image, polarity))?;
    Ok(())
}
