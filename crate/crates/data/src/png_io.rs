//! PNG readers and writers: KITTI-style 16-bit disparity maps, 8-bit RGB
//! images and 8-bit masks.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};
use sled_tensor::Tensor;

use crate::disparity::DisparityMap;
use crate::error::{io_err, DataError, Result};

fn png_err(path: &Path) -> impl FnOnce(png::DecodingError) -> DataError + '_ {
    move |e| DataError::Png(format!("{}: {e}", path.display()))
}

struct Raw {
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    data: Vec<u8>,
}

fn read_raw(path: &Path, transform: Transformations) -> Result<Raw> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(transform);
    let mut reader = decoder.read_info().map_err(png_err(path))?;
    let mut data = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut data).map_err(png_err(path))?;
    data.truncate(info.buffer_size());
    Ok(Raw {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

fn write_raw(path: &Path, width: usize, height: usize, color: ColorType, depth: BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let map = |e: png::EncodingError| DataError::Png(format!("{}: {e}", path.display()));
    let mut writer = enc.write_header().map_err(map)?;
    writer.write_image_data(data).map_err(map)?;
    writer.finish().map_err(map)
}

/// Stored value for a disparity: `round(256·d)`, at least 1 for valid pixels.
pub fn quantize_disparity(d: f64) -> Result<u16> {
    let stored = (d * 256.0).round();
    if !(0.0..=65535.0).contains(&stored) {
        return Err(DataError::Parameter(format!("disparity {d} outside the 16-bit range [0, 256)")));
    }
    Ok((stored as u16).max(1))
}

pub fn write_kitti_disp(map: &DisparityMap, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(2 * map.values().len());
    for (&v, &ok) in map.values().iter().zip(map.valid()) {
        let stored = if ok { quantize_disparity(v)? } else { 0 };
        data.extend_from_slice(&stored.to_be_bytes());
    }
    write_raw(path, map.width(), map.height(), ColorType::Grayscale, BitDepth::Sixteen, &data)
}

pub fn read_kitti_disp(path: &Path) -> Result<DisparityMap> {
    let raw = read_raw(path, Transformations::IDENTITY)?;
    if raw.color != ColorType::Grayscale || raw.depth != BitDepth::Sixteen {
        return Err(DataError::Unsupported(format!(
            "{}: disparity PNG must be 16-bit grayscale, found {:?} {:?}",
            path.display(),
            raw.depth,
            raw.color
        )));
    }
    let stored: Vec<u16> = raw.data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    let valid: Vec<bool> = stored.iter().map(|&s| s != 0).collect();
    let values = stored.iter().map(|&s| s as f64 / 256.0).collect();
    DisparityMap::new(raw.width, raw.height, values, valid)
}

/// Reads an 8-bit image as a `[3,H,W]` tensor in `[0,1]`.
pub fn read_rgb(path: &Path) -> Result<Tensor> {
    let raw = read_raw(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    let channels = match raw.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(DataError::Unsupported("unexpanded palette image".into())),
    };
    let (w, h) = (raw.width, raw.height);
    let plane = w * h;
    let mut out = vec![0.0; 3 * plane];
    for p in 0..plane {
        let px = &raw.data[p * channels..(p + 1) * channels];
        for c in 0..3 {
            let v = if channels < 3 { px[0] } else { px[c] };
            out[c * plane + p] = v as f64 / 255.0;
        }
    }
    Ok(Tensor::new(vec![3, h, w], out).expect("sized"))
}

/// Writes a `[3,H,W]` tensor in `[0,1]` as 8-bit RGB (values are clamped).
pub fn write_rgb(image: &Tensor, path: &Path) -> Result<()> {
    let s = image.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(DataError::Parameter(format!("expected [3,H,W] image, got {s:?}")));
    }
    let (h, w) = (s[1], s[2]);
    let plane = h * w;
    let d = image.data();
    let mut data = Vec::with_capacity(3 * plane);
    for p in 0..plane {
        for c in 0..3 {
            data.push((d[c * plane + p].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    write_raw(path, w, h, ColorType::Rgb, BitDepth::Eight, &data)
}

/// Writes packed RGB bytes.
pub fn write_rgb8(width: usize, height: usize, data: &[u8], path: &Path) -> Result<()> {
    write_raw(path, width, height, ColorType::Rgb, BitDepth::Eight, data)
}

/// Writes a boolean mask as 8-bit grayscale (255 = set).
pub fn write_mask(width: usize, height: usize, mask: &[bool], path: &Path) -> Result<()> {
    let data: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_raw(path, width, height, ColorType::Grayscale, BitDepth::Eight, &data)
}

/// Reads a mask; any nonzero gray level is set. Returns `(width, height, mask)`.
pub fn read_mask(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let raw = read_raw(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    if raw.color != ColorType::Grayscale {
        return Err(DataError::Unsupported(format!("{}: mask must be grayscale", path.display())));
    }
    Ok((raw.width, raw.height, raw.data.iter().map(|&v| v != 0).collect()))
}
