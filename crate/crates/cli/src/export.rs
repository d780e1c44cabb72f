//! Profile CSV files and grayscale renders of rasters.

use std::path::Path;

use lpp_core::ctf::RadialProfile;
use lpp_core::RasterImage;

use crate::error::{CliError, Result};

/// Column written for the abscissa of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    /// Spatial frequency in 1/nm; profile positions are in 1/m.
    FrequencyPerNm,
    /// Position in μm; profile positions are in m.
    PositionUm,
}

impl Abscissa {
    fn header(self) -> &'static str {
        match self {
            Abscissa::FrequencyPerNm => "s_per_nm",
            Abscissa::PositionUm => "x_um",
        }
    }

    fn scale(self) -> f64 {
        match self {
            Abscissa::FrequencyPerNm => 1e-9,
            Abscissa::PositionUm => 1e6,
        }
    }
}

/// Formats a profile as CSV with 17 significant digits, so that parsing the text
/// gives back the same doubles.
pub fn profile_csv(profile: &RadialProfile<f64>, abscissa: Abscissa) -> Result<String> {
    if profile.is_empty() {
        return Err(CliError::Config("cannot export an empty profile".into()));
    }
    let mut out = format!("{},value\n", abscissa.header());
    for (s, v) in profile.s.iter().zip(&profile.values) {
        out.push_str(&format!("{:.16e},{:.16e}\n", s * abscissa.scale(), v));
    }
    Ok(out)
}

/// Parses the output of [`profile_csv`]; returns the header and the two columns
/// in file units.
pub fn parse_profile_csv(text: &str, path: &Path) -> Result<(String, Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::format(path, 0, "empty CSV"))?.to_string();
    let mut offset = header.len() as u64 + 1;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for line in lines {
        if !line.trim().is_empty() {
            let mut cols = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                let field =
                    cols.next().ok_or_else(|| CliError::format(path, offset, format!("missing {name} column")))?;
                field
                    .trim()
                    .parse()
                    .map_err(|_| CliError::format(path, offset, format!("cannot parse {name} {field:?}")))
            };
            xs.push(next("first")?);
            ys.push(next("second")?);
        }
        offset += line.len() as u64 + 1;
    }
    Ok((header, xs, ys))
}

/// How raster values are mapped to gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    MinMax,
    /// Clip to the 1st and 99th percentiles.
    Percentile,
}

/// Maps `image` to 8-bit gray levels, row-major. A constant image maps to
/// mid-gray.
pub fn to_gray(image: &RasterImage<f64>, scaling: Scaling) -> Vec<u8> {
    let values: Vec<f64> = image.data().iter().copied().collect();
    let (lo, hi) = match scaling {
        Scaling::MinMax => image.min_max(),
        Scaling::Percentile => {
            let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            sorted.sort_by(f64::total_cmp);
            if sorted.is_empty() {
                (0.0, 0.0)
            } else {
                let at = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
                (at(0.01), at(0.99))
            }
        }
    };
    let range = hi - lo;
    values
        .iter()
        .map(|&v| {
            if !(range > 0.0) || !range.is_finite() {
                128
            } else {
                ((v - lo) / range * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

pub fn encode_png(image: &RasterImage<f64>, scaling: Scaling) -> Result<Vec<u8>> {
    let gray = to_gray(image, scaling);
    let buf = image::GrayImage::from_raw(image.width() as u32, image.height() as u32, gray).expect("size matches");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png).map_err(|e| CliError::io("<png encoder>", e))?;
    Ok(out.into_inner())
}

/// Binary PGM (P5).
pub fn encode_pgm(image: &RasterImage<f64>, scaling: Scaling) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(to_gray(image, scaling));
    out
}
