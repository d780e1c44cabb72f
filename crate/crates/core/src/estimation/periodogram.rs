//! Dominant-frequency estimation: a DFT peak refined by maximizing the
//! continuous Fourier magnitude.

use ndarray::Array2;
use num_complex::Complex;

use super::optimize::{golden_section, nelder_mead};
use crate::error::{LppError, Result};
use crate::fft::{fft2, signed_index};

/// Peak power must exceed this multiple of the mean non-DC spectral power.
pub const PEAK_SIGNIFICANCE: f64 = 50.0;

/// |Σ (v − mean)·exp(−2πi(f_x·col + f_y·row))| for frequencies in cycles/pixel.
pub fn fourier_magnitude(data: &Array2<f64>, mean: f64, fx: f64, fy: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let ex: Vec<Complex<f64>> = (0..data.ncols()).map(|j| Complex::from_polar(1.0, -two_pi * fx * j as f64)).collect();
    let mut total = Complex::new(0.0, 0.0);
    for (i, row) in data.outer_iter().enumerate() {
        let inner: Complex<f64> = row.iter().zip(&ex).map(|(&v, e)| e * (v - mean)).sum();
        total += inner * Complex::from_polar(1.0, -two_pi * fy * i as f64);
    }
    total.norm()
}

/// Frequency `(f_x, f_y)` in cycles/pixel of the strongest spatial oscillation.
///
/// The result is the representative with `f_x > 0`, or `f_x = 0, f_y > 0`.
pub fn dominant_frequency_2d(data: &Array2<f64>) -> Result<(f64, f64)> {
    let (h, w) = data.dim();
    if h < 4 || w < 4 {
        return Err(LppError::validation("image too small for frequency estimation"));
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let mut spectrum = data.mapv(|v| Complex::new(v - mean, 0.0));
    fft2(&mut spectrum);
    let mut best = (0usize, 0usize, 0.0f64);
    let mut total = 0.0;
    for ((i, j), v) in spectrum.indexed_iter() {
        let p = v.norm_sqr();
        if i == 0 && j == 0 {
            continue;
        }
        total += p;
        // Skip the lowest ring, where slow background variations live.
        let (fi, fj) = (signed_index(i, h), signed_index(j, w));
        if fi.abs() <= 1 && fj.abs() <= 1 {
            continue;
        }
        if p > best.2 {
            best = (i, j, p);
        }
    }
    let mean_power = total / (data.len() - 1) as f64;
    if !(mean_power > 0.0) || best.2 < PEAK_SIGNIFICANCE * mean_power {
        return Err(LppError::estimation(format!(
            "no significant periodic component (peak/mean spectral power {:.1}, need {PEAK_SIGNIFICANCE})",
            if mean_power > 0.0 { best.2 / mean_power } else { 0.0 }
        )));
    }
    let fy0 = signed_index(best.0, h) as f64 / h as f64;
    let fx0 = signed_index(best.1, w) as f64 / w as f64;
    let step = [0.5 / w as f64, 0.5 / h as f64];
    let refined = nelder_mead(|f| -fourier_magnitude(data, mean, f[0], f[1]), &[fx0, fy0], &step, 1e-13, 400);
    let (mut fx, mut fy) = (refined.x[0], refined.x[1]);
    if fx < 0.0 || (fx == 0.0 && fy < 0.0) {
        fx = -fx;
        fy = -fy;
    }
    Ok((fx, fy))
}

/// Fraction of the variance of `y` explained by the best sinusoid of
/// frequency `f` (cycles per unit of `x`) plus a constant.
pub fn sinusoid_fit_power(x: &[f64], y: &[f64], f: f64) -> f64 {
    sinusoid_fit(x, y, f).map(|fit| fit.explained).unwrap_or(0.0)
}

/// Least-squares fit of `y ≈ c + a·cos(2πfx) + b·sin(2πfx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
    /// Explained fraction of the variance of `y`.
    pub explained: f64,
}

pub fn sinusoid_fit(x: &[f64], y: &[f64], f: f64) -> Option<SinusoidFit> {
    let n = x.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let variance: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if variance == 0.0 {
        return None;
    }
    let two_pi_f = 2.0 * std::f64::consts::PI * f;
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, (two_pi_f * xi).cos(), (two_pi_f * xi).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coeffs = ata.try_inverse()? * aty;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi - coeffs[0] - coeffs[1] * (two_pi_f * xi).cos() - coeffs[2] * (two_pi_f * xi).sin())
        .map(|r| r * r)
        .sum();
    Some(SinusoidFit { offset: coeffs[0], cos_coeff: coeffs[1], sin_coeff: coeffs[2], explained: 1.0 - rss / variance })
}

/// Dominant frequency of a uniformly sampled series: the strongest non-zero DFT
/// bin, refined by maximizing [`sinusoid_fit_power`] within one bin either side.
///
/// `span` is the extent covered by the samples (count × spacing).
pub fn dominant_frequency_1d(x: &[f64], y: &[f64], span: f64) -> Result<f64> {
    let n = x.len();
    if n < 4 || y.len() != n {
        return Err(LppError::validation("need at least four equally many positions and values"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let x0 = x[0];
    let two_pi = 2.0 * std::f64::consts::PI;
    let bins = n / 2;
    let mut best = (0usize, 0.0f64);
    for k in 1..=bins {
        let f = k as f64 / span;
        let c: Complex<f64> =
            x.iter().zip(y).map(|(&xi, &yi)| Complex::from_polar(yi - mean, -two_pi * f * (xi - x0))).sum();
        if c.norm_sqr() > best.1 {
            best = (k, c.norm_sqr());
        }
    }
    if best.0 == 0 || best.1 == 0.0 {
        return Err(LppError::estimation("series has no oscillating component"));
    }
    let k = best.0 as f64;
    let lo = ((k - 1.0).max(0.5)) / span;
    let hi = (k + 1.0) / span;
    let centered: Vec<f64> = x.iter().map(|v| v - x0).collect();
    let m = golden_section(|f| -sinusoid_fit_power(&centered, y, f), lo, hi, Some(k / span), 1e-12 / span);
    Ok(m.x[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_off_grid_2d_frequency() {
        let (fx, fy) = (0.1234, -0.0371);
        let data = Array2::from_shape_fn((96, 128), |(i, j)| {
            3.0 + (2.0 * std::f64::consts::PI * (fx * j as f64 + fy * i as f64) + 0.7).cos()
        });
        let (ex, ey) = dominant_frequency_2d(&data).unwrap();
        // Leakage from the conjugate peak biases the maximum slightly off the true frequency.
        let q = fx.hypot(fy);
        assert!((ex - fx).hypot(ey - fy) < 1e-4 * q, "{ex} {ey}");
    }

    #[test]
    fn flat_image_has_no_peak() {
        let data = Array2::from_elem((32, 32), 5.0);
        assert!(dominant_frequency_2d(&data).is_err());
    }

    #[test]
    fn one_dimensional_refinement() {
        let x: Vec<f64> = (0..24).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| (2.0 * std::f64::consts::PI * 1.37 * v).sin()).collect();
        let f = dominant_frequency_1d(&x, &y, 2.4).unwrap();
        assert!((f - 1.37).abs() < 1e-6, "{f}");
    }
}
