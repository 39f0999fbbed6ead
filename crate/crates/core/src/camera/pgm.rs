//! Binary PGM (P5) codec for stripe images.
//!
//! Writer output is exactly `P5\n<width> <height>\n<maxval>\n` followed by
//! row-major samples, one byte each for 8-bit images and two big-endian bytes
//! for 16-bit images. The reader also accepts `#` comments and arbitrary
//! whitespace in the header, as long as maxval is 255 or 65535.

use std::io::{Read, Write};
use std::path::Path;

use super::StripeImage;
use crate::error::{Error, Result};

pub fn encode(img: &StripeImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", img.cols(), img.rows(), img.max_value());
    let bytes_per_sample = if img.bit_depth() == 8 { 1 } else { 2 };
    let mut out = Vec::with_capacity(header.len() + img.pixels().len() * bytes_per_sample);
    out.extend_from_slice(header.as_bytes());
    if img.bit_depth() == 8 {
        out.extend(img.pixels().iter().map(|p| *p as u8));
    } else {
        for p in img.pixels() {
            out.extend_from_slice(&p.to_be_bytes());
        }
    }
    out
}

pub fn write<W: Write>(img: &StripeImage, mut writer: W) -> Result<()> {
    writer.write_all(&encode(img))?;
    writer.flush()?;
    Ok(())
}

pub fn save(img: &StripeImage, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write(img, std::io::BufWriter::new(file))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.buf.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.buf.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm(format!("expected {what} at byte {start}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Pgm(format!("{what} is out of range")))
    }
}

pub fn decode(buf: &[u8]) -> Result<StripeImage> {
    if !buf.starts_with(b"P5") {
        return Err(Error::Pgm("missing P5 magic number".into()));
    }
    let mut cur = Cursor { buf, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    let bit_depth = match maxval {
        255 => 8,
        65535 => 16,
        other => {
            return Err(Error::Pgm(format!(
                "maxval {other} is unsupported; expected 255 or 65535"
            )))
        }
    };
    // exactly one whitespace byte separates the header from the raster
    match buf.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::Pgm("header is not terminated by whitespace".into())),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;
    let bytes_per_sample = if bit_depth == 8 { 1 } else { 2 };
    let raster = &buf[cur.pos..];
    if raster.len() < n * bytes_per_sample {
        return Err(Error::Pgm(format!(
            "raster has {} bytes, {width}x{height} needs {}",
            raster.len(),
            n * bytes_per_sample
        )));
    }
    let pixels = if bit_depth == 8 {
        raster[..n].iter().map(|b| *b as u16).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    StripeImage::new(height, width, bit_depth, pixels).map_err(|e| Error::Pgm(e.to_string()))
}

pub fn read<R: Read>(mut reader: R) -> Result<StripeImage> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    decode(&buf)
}

pub fn load(path: &Path) -> Result<StripeImage> {
    decode(&std::fs::read(path)?)
}
