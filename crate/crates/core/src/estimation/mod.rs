//! Inverse problems: Ronchigram fitting, Thon-ring fitting and phase-scan
//! analysis. These work in `f64` only.

pub mod optimize;
pub mod periodogram;
pub mod ronchigram;
pub mod scan;
pub mod thon;

pub use periodogram::dominant_frequency_2d;
pub use ronchigram::{
    crest_trough_profiles, fit_ronchigram, remove_dead_pixels, FringeProfiles, RonchigramFit, RonchigramHints,
};
pub use scan::{analyze_phase_scan, analyze_phase_series, PhaseScanResult};
pub use thon::{
    circularize, correct_astigmatism, correct_astigmatism_with, fit_ctf, fit_ctf_zeros, fit_defocus_polynomial,
    fit_ring_ellipse, gaussian_smooth, locate_ctf_zeros, CtfFit, DefocusSign, Ellipse, PolynomialFit, ThonOptions,
    ZeroSearch,
};

use crate::error::Result;
use crate::raster::RasterImage;

/// Spatial frequency (cycles/m, `(x, y)`) of the standing-wave fringes in an image.
///
/// Coarse DFT peak, then a continuous maximization of the Fourier magnitude; the
/// representative with positive x component is returned.
pub fn estimate_standing_wave_vector(image: &RasterImage<f64>) -> Result<(f64, f64)> {
    let (fx, fy) = dominant_frequency_2d(image.data())?;
    let px = image.pixel_size();
    Ok((fx / px, fy / px))
}
