//! Netpbm gray-map (PGM) reading and writing.
//!
//! Both the ASCII (`P2`) and binary (`P5`) variants are read, with maxval up to
//! 65535 (16-bit samples are big-endian). Values are normalised to `[0, 1]`.
//! Output is always binary `P5` with maxval 255.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skips whitespace and `#` comments.
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn uint(&mut self, what: &str) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Cursor { bytes: self.bytes, pos: start }.err(format!("{what} out of range")))
    }
}

pub fn parse_pgm(bytes: &[u8], spacing: f64) -> Result<ScalarField> {
    let mut c = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(c.err("unsupported magic number, expected P2 or P5")),
    };
    c.pos = 2;
    let width = c.uint("width")? as usize;
    let height = c.uint("height")? as usize;
    let maxval_pos = c.pos;
    let maxval = c.uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::validation(format!("image has zero size {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        c.pos = maxval_pos;
        return Err(c.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| c.err("image dimensions overflow"))?;
    let scale = 1.0 / maxval as f64;
    let mut values = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
            return Err(c.err("missing whitespace after maxval"));
        }
        c.pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        let need = n * bps;
        if bytes.len() - c.pos < need {
            c.pos = bytes.len();
            return Err(c.err(format!("raster truncated: expected {need} bytes")));
        }
        let raster = &bytes[c.pos..c.pos + need];
        for k in 0..n {
            let v = if bps == 1 {
                raster[k] as u64
            } else {
                ((raster[2 * k] as u64) << 8) | raster[2 * k + 1] as u64
            };
            if v > maxval {
                c.pos += k * bps;
                return Err(c.err(format!("sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64 * scale);
        }
    } else {
        for _ in 0..n {
            let at = c.pos;
            let v = c.uint("sample")?;
            if v > maxval {
                c.pos = at;
                return Err(c.err(format!("sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64 * scale);
        }
    }
    if width < 2 || height < 2 {
        return Err(Error::validation(format!("image {width}x{height} is smaller than 2x2")));
    }
    ScalarField::new(width, height, spacing, values)
}

pub fn load_pgm(path: &Path, spacing: f64) -> Result<ScalarField> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes, spacing)
}

/// Binary P5 encoding with maxval 255; values are clamped to `[0, 1]`.
pub fn encode_pgm(f: &ScalarField) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", f.width(), f.height()).into_bytes();
    out.extend(
        f.values()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn save_pgm(path: &Path, f: &ScalarField) -> Result<()> {
    crate::io::write_atomic(path, &encode_pgm(f))
}
