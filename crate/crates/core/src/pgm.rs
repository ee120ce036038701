//! Binary 8-bit PGM (P5) reading and writing.
//!
//! Brightness in `[0, 1]` maps to `[0, 255]` with round-half-up; values
//! outside the unit interval are clamped on write.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::cortical::Image;
use crate::error::{Error, Result};

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode(img: &Image) -> Vec<u8> {
    let n = img.size();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(img.values().iter().map(|&v| quantize(v)));
    out
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let bad = |reason: &str| Error::Format {
        what: "PGM",
        reason: reason.to_string(),
    };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
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
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("only binary P5 is supported"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header integer"));
    let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes.get(pos..pos + w * h).ok_or_else(|| bad("truncated raster"))?;
    let values = Array2::from_shape_fn((h, w), |(i, j)| raster[i * w + j] as f64 / maxval as f64);
    Image::new(values)
}

pub fn write(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(img)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
