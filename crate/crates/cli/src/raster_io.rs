//! Native raster files and MRC-2014 mode 2 images.
//!
//! Native layout, little-endian throughout:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `LPPR`                            |
//! | 4      | 4    | format version (u32, currently 1)       |
//! | 8      | 4    | width (u32)                             |
//! | 12     | 4    | height (u32)                            |
//! | 16     | 8    | pixel size in meters (f64)              |
//! | 24     | 1    | plane tag                               |
//! | 25     | 1    | value kind                              |
//! | 26     | 6    | reserved, zero                          |
//! | 32     | 4·w·h| f32 payload, row-major                  |

use std::path::Path;

use lpp_core::{Plane, RasterImage, ValueKind};
use ndarray::Array2;

use crate::error::{CliError, Result};
use crate::output::write_atomic;

const MAGIC: &[u8; 4] = b"LPPR";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

const MRC_HEADER_LEN: usize = 1024;
const MRC_MODE_FLOAT: i32 = 2;

fn plane_tag(plane: Plane) -> u8 {
    match plane {
        Plane::Image => 0,
        Plane::Diffraction => 1,
        Plane::Frequency => 2,
        Plane::PhasePlate => 3,
        Plane::Generic => 4,
    }
}

fn plane_from_tag(tag: u8) -> Option<Plane> {
    Some(match tag {
        0 => Plane::Image,
        1 => Plane::Diffraction,
        2 => Plane::Frequency,
        3 => Plane::PhasePlate,
        4 => Plane::Generic,
        _ => return None,
    })
}

fn kind_tag(kind: ValueKind) -> u8 {
    match kind {
        ValueKind::Intensity => 0,
        ValueKind::Phase => 1,
        ValueKind::Ctf => 2,
    }
}

fn kind_from_tag(tag: u8) -> Option<ValueKind> {
    Some(match tag {
        0 => ValueKind::Intensity,
        1 => ValueKind::Phase,
        2 => ValueKind::Ctf,
        _ => return None,
    })
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Encodes `image` in the native format. Values are stored as f32.
pub fn encode_raster(image: &RasterImage<f64>) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * w * h);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&image.pixel_size().to_le_bytes());
    out.push(plane_tag(image.plane()));
    out.push(kind_tag(image.kind()));
    out.extend_from_slice(&[0; 6]);
    for v in image.data().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_raster(bytes: &[u8], path: &Path) -> Result<RasterImage<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(CliError::format(path, bytes.len() as u64, "file shorter than the 32-byte header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(CliError::format(path, 0, "missing LPPR magic"));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(CliError::format(path, 4, format!("unsupported format version {version}")));
    }
    let (w, h) = (u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize);
    let pixel_size = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let plane = plane_from_tag(bytes[24])
        .ok_or_else(|| CliError::format(path, 24, format!("unknown plane tag {}", bytes[24])))?;
    let kind = kind_from_tag(bytes[25])
        .ok_or_else(|| CliError::format(path, 25, format!("unknown value kind {}", bytes[25])))?;
    let expected = w.checked_mul(h).and_then(|n| n.checked_mul(4)).map(|n| n + HEADER_LEN);
    if expected != Some(bytes.len()) {
        return Err(CliError::format(
            path,
            HEADER_LEN as u64,
            format!("header declares {w}×{h} pixels but the payload holds {} bytes", bytes.len() - HEADER_LEN),
        ));
    }
    let values: Vec<f64> =
        bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    let data = Array2::from_shape_vec((h, w), values).expect("length checked");
    RasterImage::new(data, pixel_size, plane, kind).map_err(|e| CliError::format(path, 16, e.to_string()))
}

/// Writes a native raster atomically.
pub fn write_raster(image: &RasterImage<f64>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_raster(image))
}

/// Reads a native raster, or an MRC file when the name ends in `.mrc`/`.map`.
pub fn read_raster(path: &Path) -> Result<RasterImage<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("mrc" | "map" | "mrcs") => decode_mrc(&bytes, path),
        _ => decode_raster(&bytes, path),
    }
}

/// Encodes a single-section MRC-2014 file in mode 2. The pixel size goes into
/// the cell dimensions in ångström.
pub fn encode_mrc(image: &RasterImage<f64>) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    let mut header = vec![0u8; MRC_HEADER_LEN];
    let mut put_i32 = |word: usize, v: i32| header[4 * word..4 * word + 4].copy_from_slice(&v.to_le_bytes());
    put_i32(0, w as i32);
    put_i32(1, h as i32);
    put_i32(2, 1);
    put_i32(3, MRC_MODE_FLOAT);
    put_i32(7, w as i32);
    put_i32(8, h as i32);
    put_i32(9, 1);
    put_i32(16, 1);
    put_i32(17, 2);
    put_i32(18, 3);
    put_i32(27, 20140);
    let angstrom = image.pixel_size() * 1e10;
    let (min, max) = image.min_max();
    let mean = image.mean();
    let rms = (image.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w * h) as f64).sqrt();
    let mut put_f32 = |word: usize, v: f64| header[4 * word..4 * word + 4].copy_from_slice(&(v as f32).to_le_bytes());
    put_f32(10, angstrom * w as f64);
    put_f32(11, angstrom * h as f64);
    put_f32(12, angstrom);
    put_f32(13, 90.0);
    put_f32(14, 90.0);
    put_f32(15, 90.0);
    put_f32(19, min);
    put_f32(20, max);
    put_f32(21, mean);
    put_f32(54, rms);
    header[208..212].copy_from_slice(b"MAP ");
    header[212..216].copy_from_slice(&[0x44, 0x44, 0, 0]);

    let mut out = header;
    out.reserve(4 * w * h);
    for v in image.data().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn write_mrc(image: &RasterImage<f64>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_mrc(image))
}

/// Decodes a mode 2 MRC file holding one section. Honors the byte order stamp
/// and skips the extended header.
pub fn decode_mrc(bytes: &[u8], path: &Path) -> Result<RasterImage<f64>> {
    if bytes.len() < MRC_HEADER_LEN {
        return Err(CliError::format(path, bytes.len() as u64, "file shorter than the 1024-byte MRC header"));
    }
    let big_endian = bytes[212] == 0x11;
    let word = |i: usize| -> [u8; 4] { bytes[4 * i..4 * i + 4].try_into().unwrap() };
    let int = |i: usize| {
        if big_endian {
            i32::from_be_bytes(word(i))
        } else {
            i32::from_le_bytes(word(i))
        }
    };
    let float = |i: usize| {
        if big_endian {
            f32::from_be_bytes(word(i))
        } else {
            f32::from_le_bytes(word(i))
        }
    };

    let mode = int(3);
    if mode != MRC_MODE_FLOAT {
        return Err(CliError::format(
            path,
            12,
            format!("unsupported MRC mode {mode}; only mode 2 (32-bit float) is read"),
        ));
    }
    let (nx, ny, nz) = (int(0), int(1), int(2));
    if nx <= 0 || ny <= 0 {
        return Err(CliError::format(path, 0, format!("invalid dimensions {nx}×{ny}")));
    }
    if nz != 1 {
        return Err(CliError::format(path, 8, format!("expected a single section, found nz = {nz}")));
    }
    let nsymbt = int(23);
    if nsymbt < 0 {
        return Err(CliError::format(path, 92, format!("negative extended header length {nsymbt}")));
    }
    let start = MRC_HEADER_LEN + nsymbt as usize;
    let (w, h) = (nx as usize, ny as usize);
    let needed = start + 4 * w * h;
    if bytes.len() < needed {
        return Err(CliError::format(
            path,
            bytes.len() as u64,
            format!("payload of {w}×{h} floats needs {needed} bytes, file has {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[start..needed]
        .chunks_exact(4)
        .map(|c| {
            let c: [u8; 4] = c.try_into().unwrap();
            (if big_endian { f32::from_be_bytes(c) } else { f32::from_le_bytes(c) }) as f64
        })
        .collect();
    let mx = int(7);
    let cell_x = float(10) as f64;
    let pixel_size = if mx > 0 && cell_x > 0.0 { cell_x / mx as f64 * 1e-10 } else { 1e-10 };
    let data = Array2::from_shape_vec((h, w), values).expect("length checked");
    RasterImage::new(data, pixel_size, Plane::Image, ValueKind::Intensity)
        .map_err(|e| CliError::format(path, 40, e.to_string()))
}
