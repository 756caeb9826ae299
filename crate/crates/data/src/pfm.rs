//! Single-channel Portable Float Map.
//!
//! Header: `Pf`, width and height, then a scale whose sign selects the
//! payload byte order (negative = little-endian), each terminated by
//! whitespace; after exactly one whitespace byte follow `width × height`
//! 32-bit floats, bottom row first. Invalid pixels are stored as `+inf`.

use std::fs;
use std::path::Path;

use crate::disparity::DisparityMap;
use crate::error::{io_err, DataError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

pub fn encode_pfm(map: &DisparityMap, endian: Endian) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let scale = match endian {
        Endian::Little => "-1.0",
        Endian::Big => "1.0",
    };
    let mut out = format!("Pf\n{w} {h}\n{scale}\n").into_bytes();
    out.reserve(4 * w * h);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = map.get(x, y).map_or(f32::INFINITY, |v| v as f32);
            match endian {
                Endian::Little => out.extend_from_slice(&v.to_le_bytes()),
                Endian::Big => out.extend_from_slice(&v.to_be_bytes()),
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next whitespace-delimited token; leaves the cursor on the delimiter.
    fn token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DataError::Parse { offset: start, msg: format!("expected {what}") });
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| DataError::Parse { offset: start, msg: format!("{what} is not ASCII") })?;
        Ok((start, text))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (offset, text) = self.token(what)?;
        text.parse().map_err(|_| DataError::Parse { offset, msg: format!("invalid {what} {text:?}") })
    }
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let mut c = Cursor { bytes, pos: 0 };
    let (offset, magic) = c.token("magic")?;
    match magic {
        "Pf" => {}
        "PF" => return Err(DataError::Unsupported("three-channel PFM (\"PF\")".into())),
        other => return Err(DataError::Parse { offset, msg: format!("bad magic {other:?}") }),
    }
    let width: usize = c.number("width")?;
    let height: usize = c.number("height")?;
    let scale_at = c.pos;
    let scale: f64 = c.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(DataError::Parse { offset: scale_at, msg: format!("scale must be nonzero, got {scale}") });
    }
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return Err(DataError::Parse { offset: c.pos, msg: "missing whitespace after scale".into() });
    }
    let start = c.pos + 1;
    let need = width.checked_mul(height).and_then(|n| n.checked_mul(4)).ok_or_else(|| DataError::Parse {
        offset: 0,
        msg: format!("dimensions {width}x{height} overflow"),
    })?;
    if bytes.len() - start != need {
        return Err(DataError::Parse {
            offset: start,
            msg: format!("expected {need} payload bytes, found {}", bytes.len() - start),
        });
    }
    let mut values = vec![0.0; width * height];
    let mut valid = vec![false; width * height];
    for (k, chunk) in bytes[start..].chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("4 bytes");
        let v = if scale < 0.0 { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (row, x) = (k / width, k % width);
        let i = (height - 1 - row) * width + x;
        if v.is_finite() && v >= 0.0 {
            values[i] = v as f64;
            valid[i] = true;
        }
    }
    DisparityMap::new(width, height, values, valid)
}

pub fn write_pfm(map: &DisparityMap, path: &Path) -> Result<()> {
    fs::write(path, encode_pfm(map, Endian::Little)).map_err(io_err(path))
}

pub fn read_pfm(path: &Path) -> Result<DisparityMap> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_pfm(&bytes)
}
