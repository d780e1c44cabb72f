//! Paraxial electron wave propagation and Ronchigram synthesis.

use ndarray::{s, Array2, Zip};
use num_complex::Complex;

use crate::error::{LppError, Result};
use crate::fft::{fft2, ifft2, next_fast_len, signed_index};
use crate::physics::{phase_profile, ElectronBeam, LaserMode};
use crate::raster::{Plane, RasterImage, ValueKind};
use crate::scalar::Real;
use crate::special::bessel_j;

/// Smallest accepted field edge length.
pub const MIN_FIELD_SIZE: usize = 16;
/// Zero-padding factor per axis for [`Boundary::ZeroPadded`].
pub const PAD_FACTOR: usize = 2;
/// Minimum detector pixels per standing-wave fringe.
pub const MIN_PIXELS_PER_FRINGE: f64 = 4.0;

/// Plane a [`ComplexField`] is defined in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPlane {
    PhasePlate,
    Image,
    Generic,
}

/// Sampled complex wave function.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T> {
    values: Array2<Complex<T>>,
    pixel_size: T,
    plane: FieldPlane,
}

impl<T: Real> ComplexField<T> {
    pub fn new(values: Array2<Complex<T>>, pixel_size: T, plane: FieldPlane) -> Result<Self> {
        let (h, w) = values.dim();
        for n in [w, h] {
            if n < MIN_FIELD_SIZE || n % 2 != 0 {
                return Err(LppError::validation(format!(
                    "field dimensions must be even and at least {MIN_FIELD_SIZE}, got {w}x{h}"
                )));
            }
        }
        if !(pixel_size > T::zero()) || !pixel_size.is_finite() {
            return Err(LppError::validation(format!("pixel size must be positive, got {pixel_size}")));
        }
        Ok(Self { values, pixel_size, plane })
    }

    /// Unit-amplitude plane wave.
    pub fn plane_wave(width: usize, height: usize, pixel_size: T, plane: FieldPlane) -> Result<Self> {
        Self::new(Array2::from_elem((height, width), Complex::new(T::one(), T::zero())), pixel_size, plane)
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn pixel_size(&self) -> T {
        self.pixel_size
    }

    pub fn plane(&self) -> FieldPlane {
        self.plane
    }

    pub fn values(&self) -> &Array2<Complex<T>> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex<T>> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<Complex<T>> {
        self.values
    }

    /// |ψ|² per pixel.
    pub fn intensity(&self) -> Array2<T> {
        self.values.mapv(|v| v.norm_sqr())
    }

    /// Σ|ψ|²·(pixel area), accumulated in `f64`.
    pub fn total_power(&self) -> f64 {
        let area = self.pixel_size.as_f64().powi(2);
        self.values.iter().map(|v| v.norm_sqr().as_f64()).sum::<f64>() * area
    }
}

/// How the finite grid is extended for the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Linear convolution: the field is embedded in a zero frame of
    /// [`PAD_FACTOR`] times its size and cropped afterwards.
    #[default]
    ZeroPadded,
    /// Cyclic convolution on the grid itself, for fields that are periodic over
    /// the grid (plane waves, gratings with an integer number of periods).
    Periodic,
}

/// Propagates `field` by `distance` (m) with linear-convolution boundaries.
pub fn fresnel_propagate<T: Real>(field: &ComplexField<T>, distance: T, wavenumber: T) -> Result<ComplexField<T>> {
    fresnel_propagate_with(field, distance, wavenumber, Boundary::ZeroPadded)
}

/// Propagates `field` by `distance` (m) by multiplying its spectrum with the
/// Fresnel transfer function `exp(i k z − iπλz(fx² + fy²))`.
///
/// Fails with a sampling error when the transfer-function chirp is aliased on
/// the working grid, i.e. when `N·dx² < λ|z|`.
pub fn fresnel_propagate_with<T: Real>(
    field: &ComplexField<T>,
    distance: T,
    wavenumber: T,
    boundary: Boundary,
) -> Result<ComplexField<T>> {
    let z = distance.as_f64();
    let k = wavenumber.as_f64();
    if z == 0.0 || !z.is_finite() {
        return Err(LppError::validation(format!("propagation distance must be non-zero and finite, got {z}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(LppError::validation(format!("wavenumber must be positive, got {k}")));
    }
    let dx = field.pixel_size.as_f64();
    let lambda = 2.0 * std::f64::consts::PI / k;
    let factor = match boundary {
        Boundary::ZeroPadded => PAD_FACTOR,
        Boundary::Periodic => 1,
    };
    let needed = (lambda * z.abs() / (dx * dx)).ceil() as usize;
    let smallest = field.width().min(field.height());
    if smallest * factor < needed {
        let required = needed.div_ceil(factor).next_multiple_of(2);
        return Err(LppError::Sampling {
            message: format!(
                "Fresnel chirp for z = {z:e} m, λ = {lambda:e} m is aliased at pixel size {dx:e} m on a {}x{} grid",
                field.width(),
                field.height()
            ),
            required,
        });
    }

    let (h, w) = field.values.dim();
    let (ph, pw) = (h * factor, w * factor);
    let (oy, ox) = ((ph - h) / 2, (pw - w) / 2);
    let mut work = Array2::from_elem((ph, pw), Complex::new(T::zero(), T::zero()));
    work.slice_mut(s![oy..oy + h, ox..ox + w]).assign(&field.values);

    fft2(&mut work);
    let carrier = Complex::from_polar(1.0, (k * z).rem_euclid(2.0 * std::f64::consts::PI));
    let hx = chirp(pw, dx, lambda, z);
    let hy = chirp(ph, dx, lambda, z);
    Zip::indexed(&mut work).par_for_each(|(i, j), v| {
        let t = carrier * hy[i] * hx[j];
        *v = *v * Complex::new(T::lit(t.re), T::lit(t.im));
    });
    ifft2(&mut work);

    let values = work.slice(s![oy..oy + h, ox..ox + w]).to_owned();
    ComplexField::new(values, field.pixel_size, field.plane)
}

/// One axis of the separable transfer function, `exp(−iπλz f²)`, in FFT order.
fn chirp(n: usize, dx: f64, lambda: f64, z: f64) -> Vec<Complex<f64>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let f = signed_index(i, n) as f64 / (n as f64 * dx);
            Complex::from_polar(1.0, (-std::f64::consts::PI * lambda * z * f * f).rem_euclid(two_pi))
        })
        .collect()
}

/// Geometry of a Ronchigram recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RonchigramSetup<T> {
    pub beam: ElectronBeam<T>,
    pub mode: LaserMode<T>,
    /// Signed distance Δ of the laser plane downstream of the diffraction plane (m).
    pub delta: T,
    /// Effective focal length f (m).
    pub focal_length: T,
    /// Magnification M between the diffraction plane and the detector.
    pub magnification: T,
}

impl<T: Real> RonchigramSetup<T> {
    pub fn new(beam: ElectronBeam<T>, mode: LaserMode<T>, delta: T, focal_length: T, magnification: T) -> Result<Self> {
        if !(focal_length > T::zero()) || !focal_length.is_finite() {
            return Err(LppError::validation(format!("focal length must be positive, got {focal_length}")));
        }
        if !(magnification > T::zero()) || !magnification.is_finite() {
            return Err(LppError::validation(format!("magnification must be positive, got {magnification}")));
        }
        if !delta.is_finite() {
            return Err(LppError::validation("plate offset must be finite"));
        }
        Ok(Self { beam, mode, delta, focal_length, magnification })
    }

    /// Ratio of a laser-plane length to the detector length it is imaged onto, |Δ|/(Mf).
    pub fn plate_scale(&self) -> T {
        self.delta.abs() / (self.magnification * self.focal_length)
    }

    /// Standing-wave fringe period on the detector, (Mf/|Δ|)·λ_L/2 (m).
    pub fn detector_fringe_period(&self) -> T {
        self.mode.wavelength() / (T::lit(2.0) * self.plate_scale())
    }
}

/// Detector sampling and placement of the laser in the detector frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorGrid<T> {
    pub width: usize,
    pub height: usize,
    /// Detector pixel pitch (m).
    pub pixel_size: T,
    /// Laser focus relative to the grid center `(width/2, height/2)`, in pixels (x, y).
    pub center: (T, T),
    /// Angle of the laser propagation axis from the detector x axis (rad).
    pub rotation: T,
}

impl<T: Real> DetectorGrid<T> {
    /// Grid with the laser focus at the center and its axis along x.
    pub fn centered(width: usize, height: usize, pixel_size: T) -> Self {
        Self { width, height, pixel_size, center: (T::zero(), T::zero()), rotation: T::zero() }
    }

    pub fn with_center(self, center: (T, T)) -> Self {
        Self { center, ..self }
    }

    pub fn with_rotation(self, rotation: T) -> Self {
        Self { rotation, ..self }
    }
}

/// Synthesizes the normalized Ronchigram `|ψ_im|²` on `grid`.
///
/// The detector point `x` sees the laser-plane wave at `(Δ/(Mf))·x` after Fresnel
/// propagation over Δ, so the laser phase is sampled on the detector grid scaled
/// by `Δ/(Mf)` and propagated there. The illumination is a uniform unit wave, so
/// the background far from the laser is exactly 1.
pub fn synthesize_ronchigram<T: Real>(setup: &RonchigramSetup<T>, grid: &DetectorGrid<T>) -> Result<RasterImage<T>> {
    if setup.delta == T::zero() {
        return Err(LppError::validation(
            "plate offset Δ = 0 is the in-focus phase plate condition; use the CTF engine for that case",
        ));
    }
    if grid.width < MIN_FIELD_SIZE
        || grid.height < MIN_FIELD_SIZE
        || !grid.width.is_multiple_of(2)
        || !grid.height.is_multiple_of(2)
    {
        return Err(LppError::validation(format!(
            "detector grid must be even and at least {MIN_FIELD_SIZE} pixels per axis, got {}x{}",
            grid.width, grid.height
        )));
    }
    if !(grid.pixel_size > T::zero()) || !grid.pixel_size.is_finite() {
        return Err(LppError::validation("detector pixel size must be positive"));
    }
    let px = grid.pixel_size.as_f64();
    let fringe_px = setup.detector_fringe_period().as_f64() / px;
    if fringe_px < MIN_PIXELS_PER_FRINGE {
        let span = grid.width.max(grid.height) as f64;
        let required = ((span * MIN_PIXELS_PER_FRINGE / fringe_px).ceil() as usize).next_multiple_of(2);
        return Err(LppError::Sampling {
            message: format!(
                "standing-wave fringes span {fringe_px:.2} detector pixels, need at least {MIN_PIXELS_PER_FRINGE}"
            ),
            required,
        });
    }

    let scale = setup.plate_scale().as_f64();
    let plate_px = scale * px;
    let lambda_e = setup.beam.wavelength().as_f64();
    let delta = setup.delta.as_f64();
    // The laser phase extends over the whole grid, so the cyclic convolution is
    // run on a frame of true field values wide enough that wrap-around from the
    // artificial periodic edge never reaches the cropped region.
    let spread = (lambda_e * delta.abs() / (plate_px * plate_px)).ceil() as usize + 2;
    let gw = next_fast_len(grid.width + 2 * spread).next_multiple_of(2);
    let gh = next_fast_len(grid.height + 2 * spread).next_multiple_of(2);
    let (ox, oy) = ((gw - grid.width) / 2, (gh - grid.height) / 2);

    let sign = delta.signum();
    let (cos_r, sin_r) = (grid.rotation.as_f64().cos(), grid.rotation.as_f64().sin());
    let cx = grid.width as f64 / 2.0 + grid.center.0.as_f64();
    let cy = grid.height as f64 / 2.0 + grid.center.1.as_f64();
    let mode = setup.mode;
    let mut values = Array2::from_elem((gh, gw), Complex::new(T::zero(), T::zero()));
    Zip::indexed(&mut values).par_for_each(|(i, j), v| {
        let dx = (j as f64 - ox as f64 - cx) * plate_px * sign;
        let dy = (i as f64 - oy as f64 - cy) * plate_px * sign;
        let u = dx * cos_r + dy * sin_r;
        let w = -dx * sin_r + dy * cos_r;
        let eta = phase_profile(T::lit(u), T::lit(w), &mode);
        *v = Complex::from_polar(T::one(), -eta);
    });
    let field = ComplexField::new(values, T::lit(plate_px), FieldPlane::PhasePlate)?;
    let propagated = fresnel_propagate_with(&field, setup.delta, setup.beam.wavenumber(), Boundary::Periodic)?;
    let image = propagated.values().slice(s![oy..oy + grid.height, ox..ox + grid.width]).mapv(|v| v.norm_sqr());
    RasterImage::new(image, grid.pixel_size, Plane::Image, ValueKind::Intensity)
}

/// Two-term Jacobi-Anger estimate of the cosine-fringe amplitude of a normalized
/// Ronchigram, `4·J₁(η₀/2)/J₀(η₀/2)·sin(2Δk_L²/k)`.
///
/// Positive values mean the image is darker than background at the antinodes.
pub fn analytic_fringe_contrast<T: Real>(peak_phase: T, delta: T, k: T, k_laser: T) -> Result<T> {
    check_contrast_inputs(peak_phase, k, k_laser)?;
    let half = peak_phase / T::lit(2.0);
    let j0 = bessel_j(0, half);
    if j0.abs() < T::epsilon() {
        return Err(LppError::Domain(format!("J0({half}) vanishes")));
    }
    let phi = T::lit(2.0) * delta * k_laser * k_laser / k;
    Ok(T::lit(4.0) * bessel_j(1, half) / j0 * phi.sin())
}

/// Fringe amplitude of an ideal thin sinusoidal grating `η₀/2·(1 + cos 2k_L x)`
/// after propagation over Δ, summed over all diffraction orders:
/// `4·Σₙ Jₙ(η₀/2)·Jₙ₋₁(η₀/2)·sin((2n−1)·2Δk_L²/k)`.
///
/// Same sign convention as [`analytic_fringe_contrast`]; the two agree to
/// first order in η₀.
pub fn grating_fringe_contrast<T: Real>(peak_phase: T, delta: T, k: T, k_laser: T) -> Result<T> {
    check_contrast_inputs(peak_phase, k, k_laser)?;
    let half = peak_phase.as_f64() / 2.0;
    let phi = 2.0 * (delta * k_laser * k_laser / k).as_f64();
    let mut total = 0.0;
    for n in 1..40 {
        let term = bessel_j(n, half) * bessel_j(n - 1, half);
        total += term * ((2 * n - 1) as f64 * phi).sin();
        if term.abs() < 1e-18 {
            break;
        }
    }
    Ok(T::lit(4.0 * total))
}

fn check_contrast_inputs<T: Real>(peak_phase: T, k: T, k_laser: T) -> Result<()> {
    if !(peak_phase >= T::zero()) || !(peak_phase < T::PI()) {
        return Err(LppError::validation(format!("peak phase must lie in [0, π), got {peak_phase}")));
    }
    if !(k > T::zero()) || !(k_laser > T::zero()) {
        return Err(LppError::validation("wavenumbers must be positive"));
    }
    if peak_phase > T::lit(1.5) {
        log::warn!("peak phase {peak_phase} rad is beyond the range where the two-term expansion is accurate");
    }
    Ok(())
}

/// Plate offsets that maximize the Ronchigram contrast,
/// `Δ_max = (π/2)(k/k_L²)(j + ½)` for `j = 0..count`.
pub fn contrast_maximizing_offsets<T: Real>(
    beam: &ElectronBeam<T>,
    laser_wavelength: T,
    count: usize,
) -> Result<Vec<T>> {
    if count == 0 {
        return Err(LppError::validation("count must be at least 1"));
    }
    let spacing = contrast_half_period(beam, laser_wavelength)?;
    Ok((0..count).map(|j| spacing * (T::from_len(j) + T::lit(0.5))).collect())
}

/// Offset Δ = −(π/4)(k/k_L²) at which the fringe contrast is extremal for the
/// smallest |Δ| on the negative side; used as the fixed Δ when only a lower bound
/// on η₀ is sought.
pub fn lower_bound_offset<T: Real>(beam: &ElectronBeam<T>, laser_wavelength: T) -> Result<T> {
    Ok(-contrast_half_period(beam, laser_wavelength)? / T::lit(2.0))
}

/// (π/2)(k/k_L²): spacing between consecutive contrast maxima in Δ.
fn contrast_half_period<T: Real>(beam: &ElectronBeam<T>, laser_wavelength: T) -> Result<T> {
    if !(laser_wavelength > T::zero()) {
        return Err(LppError::validation("laser wavelength must be positive"));
    }
    let k_l = T::lit(2.0) * T::PI() / laser_wavelength;
    Ok(T::FRAC_PI_2() * beam.wavenumber() / (k_l * k_l))
}
