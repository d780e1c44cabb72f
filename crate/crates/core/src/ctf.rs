//! Contrast transfer with a laser phase plate in the diffraction plane,
//! weak-phase image formation and angular reductions of frequency-plane maps.
//!
//! Frequency-plane rasters store DC at `(n/2, n/2)`; column index runs along
//! `s_x`, row index along `s_y`.

use ndarray::{Array2, Zip};
use num_complex::Complex;

use crate::error::{LppError, Result};
use crate::fft::{fft2, fftshift, ifft2, ifftshift};
use crate::physics::{phase_profile, ElectronBeam, LaserMode};
use crate::raster::{Plane, RasterImage, ValueKind};
use crate::scalar::Real;

/// Default half-maximum radius of the envelope, (0.51 nm)⁻¹.
pub const DEFAULT_ENVELOPE_RADIUS: f64 = 1.0 / 0.51e-9;
/// Weak-phase validity limit (rad); larger objects only trigger a warning.
pub const WEAK_PHASE_LIMIT: f64 = 0.2;

/// Two-fold astigmatism: the defocus seen along azimuth φ is
/// `ΔZ + amplitude·cos(2(φ − angle))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Astigmatism<T> {
    pub amplitude: T,
    pub angle: T,
}

/// Objective-lens settings entering the CTF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticsConfig<T> {
    /// Effective focal length f (m), mapping diffraction-plane position x to s = x/(λf).
    pub focal_length: T,
    /// Defocus ΔZ (m); positive is underfocus.
    pub defocus: T,
    /// Spherical aberration C_s (m).
    pub spherical_aberration: T,
    /// Radius (1/m) at which the Gaussian envelope falls to one half.
    pub envelope_half_max_radius: T,
    pub astigmatism: Astigmatism<T>,
}

impl<T: Real> OpticsConfig<T> {
    pub fn new(focal_length: T, defocus: T, spherical_aberration: T, envelope_half_max_radius: T) -> Result<Self> {
        let config = Self {
            focal_length,
            defocus,
            spherical_aberration,
            envelope_half_max_radius,
            astigmatism: Astigmatism { amplitude: T::zero(), angle: T::zero() },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_astigmatism(self, amplitude: T, angle: T) -> Result<Self> {
        let config = Self { astigmatism: Astigmatism { amplitude, angle }, ..self };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(self.focal_length > T::zero()) || !self.focal_length.is_finite() {
            return Err(LppError::validation(format!("focal length must be positive, got {}", self.focal_length)));
        }
        if !(self.envelope_half_max_radius > T::zero()) {
            return Err(LppError::validation("envelope radius must be positive"));
        }
        if !(self.spherical_aberration >= T::zero()) || !self.spherical_aberration.is_finite() {
            return Err(LppError::validation("spherical aberration must be non-negative"));
        }
        if !self.defocus.is_finite() || !self.astigmatism.amplitude.is_finite() || !self.astigmatism.angle.is_finite() {
            return Err(LppError::validation("defocus and astigmatism must be finite"));
        }
        Ok(())
    }
}

/// Position of the electron beam relative to the laser focus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateAlignment<T> {
    /// Offset along the laser propagation axis (m).
    pub transverse_offset: T,
    /// Offset perpendicular to the laser axis in the plate plane (m).
    pub lateral_offset: T,
    /// Orientation of the laser axis in the frequency plane, in [0, π).
    pub rotation: T,
}

impl<T: Real> PlateAlignment<T> {
    pub fn new(transverse_offset: T, lateral_offset: T, rotation: T) -> Result<Self> {
        if !transverse_offset.is_finite() || !lateral_offset.is_finite() {
            return Err(LppError::validation("alignment offsets must be finite"));
        }
        if !(rotation >= T::zero()) || !(rotation < T::PI()) {
            return Err(LppError::validation(format!("rotation must lie in [0, π), got {rotation}")));
        }
        Ok(Self { transverse_offset, lateral_offset, rotation })
    }

    pub fn centered() -> Self {
        Self { transverse_offset: T::zero(), lateral_offset: T::zero(), rotation: T::zero() }
    }
}

/// Square frequency grid with DC at `(size/2, size/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid<T> {
    pub size: usize,
    /// Sample spacing (1/m).
    pub step: T,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(size: usize, step: T) -> Result<Self> {
        if size < 2 || !size.is_multiple_of(2) {
            return Err(LppError::validation(format!("frequency grid size must be even and ≥ 2, got {size}")));
        }
        if !(step > T::zero()) || !step.is_finite() {
            return Err(LppError::validation(format!("frequency step must be positive, got {step}")));
        }
        Ok(Self { size, step })
    }

    /// Frequency grid of the DFT of a `size`×`size` image with pitch `pixel_size`.
    pub fn for_image(size: usize, pixel_size: T) -> Result<Self> {
        Self::new(size, T::one() / (T::from_len(size) * pixel_size))
    }

    /// `(s_x, s_y)` of grid sample `(row, col)`.
    pub fn frequency(&self, row: usize, col: usize) -> (T, T) {
        let half = (self.size / 2) as isize;
        (T::lit((col as isize - half) as f64) * self.step, T::lit((row as isize - half) as f64) * self.step)
    }
}

/// CTF sampled on a [`FrequencyGrid`].
///
/// The inversion-symmetric form is real. The general form is Hermitian,
/// `C(−s) = C(s)*`, which keeps images real but lets odd parts of the laser
/// phase show up as an imaginary component.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfMap<T> {
    values: Array2<Complex<T>>,
    grid: FrequencyGrid<T>,
    symmetric: bool,
}

impl<T: Real> CtfMap<T> {
    pub fn values(&self) -> &Array2<Complex<T>> {
        &self.values
    }

    pub fn grid(&self) -> FrequencyGrid<T> {
        self.grid
    }

    pub fn step(&self) -> T {
        self.grid.step
    }

    /// Whether the inversion-symmetric form was used.
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Real part as a frequency-plane raster.
    pub fn to_raster(&self) -> RasterImage<T> {
        RasterImage::new(self.values.mapv(|v| v.re), self.grid.step, Plane::Frequency, ValueKind::Ctf)
            .expect("grid step is validated")
    }

    /// Builds a map from precomputed values, e.g. after reading one from disk.
    pub fn from_values(values: Array2<Complex<T>>, step: T, symmetric: bool) -> Result<Self> {
        let (h, w) = values.dim();
        if h != w {
            return Err(LppError::GridMismatch(format!("CTF map must be square, got {w}x{h}")));
        }
        Ok(Self { values, grid: FrequencyGrid::new(w, step)?, symmetric })
    }
}

/// Wave aberration γ(s) = π/2·(−2ΔZλs² + C_sλ³s⁴) at radial frequency `s`,
/// using the mean defocus.
pub fn aberration_phase<T: Real>(s: T, config: &OpticsConfig<T>, beam: &ElectronBeam<T>) -> T {
    debug_assert!(s >= T::zero(), "radial frequency must be non-negative");
    aberration_with_defocus(s * s, config.defocus, config.spherical_aberration, beam.wavelength())
}

/// γ at the frequency vector `(s_x, s_y)`, including astigmatism.
pub fn aberration_phase_2d<T: Real>(sx: T, sy: T, config: &OpticsConfig<T>, beam: &ElectronBeam<T>) -> T {
    let s2 = sx * sx + sy * sy;
    let astig = config.astigmatism;
    let defocus = if astig.amplitude == T::zero() || s2 == T::zero() {
        config.defocus
    } else {
        let azimuth = sy.atan2(sx);
        config.defocus + astig.amplitude * (T::lit(2.0) * (azimuth - astig.angle)).cos()
    };
    aberration_with_defocus(s2, defocus, config.spherical_aberration, beam.wavelength())
}

fn aberration_with_defocus<T: Real>(s2: T, defocus: T, cs: T, lambda: T) -> T {
    T::FRAC_PI_2() * (-T::lit(2.0) * defocus * lambda * s2 + cs * lambda * lambda * lambda * s2 * s2)
}

/// Gaussian envelope `exp(−ln2·(s/s_h)²)`.
pub fn envelope<T: Real>(s: T, config: &OpticsConfig<T>) -> T {
    let r = s / config.envelope_half_max_radius;
    (-T::LN_2() * r * r).exp()
}

/// Laser phase η seen by the scattered wave at frequency `(s_x, s_y)`.
///
/// The frequency maps to the diffraction-plane point `s·λ_e·f`, which is rotated
/// into the laser frame and shifted by the alignment offsets before evaluating
/// the standing-wave phase profile.
pub fn laser_phase_of_frequency<T: Real>(
    sx: T,
    sy: T,
    mode: &LaserMode<T>,
    align: &PlateAlignment<T>,
    focal_length: T,
    beam: &ElectronBeam<T>,
) -> T {
    let scale = beam.wavelength() * focal_length;
    let (sin_r, cos_r) = align.rotation.sin_cos();
    let u = (sx * cos_r + sy * sin_r) * scale - align.transverse_offset;
    let v = (-sx * sin_r + sy * cos_r) * scale - align.lateral_offset;
    phase_profile(u, v, mode)
}

/// Largest frequency step that still puts four samples on each standing-wave
/// period in the frequency plane, λ_L/(8λ_e f).
pub fn max_frequency_step<T: Real>(mode: &LaserMode<T>, focal_length: T, beam: &ElectronBeam<T>) -> T {
    mode.wavelength() / (T::lit(8.0) * beam.wavelength() * focal_length)
}

/// Samples the CTF over `grid`.
///
/// With `symmetric` the inversion-symmetric form `sin(η(s) − η(0) + γ(s))·E(s)`
/// is used. Otherwise the general form
/// `(i/2)(e^{iζ(0)}e^{−iζ(−s)} − e^{−iζ(0)}e^{iζ(s)})·E(s)` with `ζ = η + γ`,
/// which reduces to the former whenever `η(s) = η(−s)`.
pub fn ctf_map<T: Real>(
    grid: &FrequencyGrid<T>,
    config: &OpticsConfig<T>,
    mode: &LaserMode<T>,
    align: &PlateAlignment<T>,
    beam: &ElectronBeam<T>,
    symmetric: bool,
) -> Result<CtfMap<T>> {
    let limit = max_frequency_step(mode, config.focal_length, beam);
    if grid.step > limit {
        let span = grid.step * T::from_len(grid.size);
        let required = ((span / limit).ceil().as_f64() as usize).next_multiple_of(2);
        return Err(LppError::Sampling {
            message: format!(
                "frequency step {:e} 1/m exceeds λ_L/(8λ_e f) = {:e} 1/m; the standing-wave structure is aliased",
                grid.step, limit
            ),
            required,
        });
    }
    let f = config.focal_length;
    let eta = |sx: T, sy: T| laser_phase_of_frequency(sx, sy, mode, align, f, beam);
    let eta0 = eta(T::zero(), T::zero());
    let mut values = Array2::from_elem((grid.size, grid.size), Complex::new(T::zero(), T::zero()));
    Zip::indexed(&mut values).par_for_each(|(i, j), v| {
        let (sx, sy) = grid.frequency(i, j);
        let s = (sx * sx + sy * sy).sqrt();
        let gamma = aberration_phase_2d(sx, sy, config, beam);
        let damping = envelope(s, config);
        *v = if symmetric {
            Complex::new((eta(sx, sy) - eta0 + gamma).sin() * damping, T::zero())
        } else {
            let zeta_plus = eta(sx, sy) + gamma;
            let zeta_minus = eta(-sx, -sy) + gamma;
            let a = Complex::from_polar(T::one(), eta0 - zeta_minus);
            let b = Complex::from_polar(T::one(), zeta_plus - eta0);
            (a - b) * Complex::new(T::zero(), T::lit(0.5) * damping)
        };
    });
    Ok(CtfMap { values, grid: *grid, symmetric })
}

/// Image of a weak phase object, `1 + F⁻¹[−2·φ̂(s)·CTF(s)]`.
///
/// The Nyquist row and column have no conjugate partner on an even grid and
/// are dropped.
pub fn simulate_weak_phase_image<T: Real>(object_phase: &RasterImage<T>, ctf: &CtfMap<T>) -> Result<RasterImage<T>> {
    let n = ctf.grid.size;
    if object_phase.width() != n || object_phase.height() != n {
        return Err(LppError::GridMismatch(format!(
            "object is {}x{}, CTF map is {n}x{n}",
            object_phase.width(),
            object_phase.height()
        )));
    }
    let expected_step = 1.0 / (n as f64 * object_phase.pixel_size().as_f64());
    let step = ctf.grid.step.as_f64();
    if ((step - expected_step) / expected_step).abs() > 1e-6 {
        return Err(LppError::GridMismatch(format!(
            "CTF step {step:e} 1/m does not match the object's frequency step {expected_step:e} 1/m"
        )));
    }
    let peak = object_phase.data().iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if peak.as_f64() > WEAK_PHASE_LIMIT {
        log::warn!("object phase reaches {peak} rad; the weak-phase approximation assumes ≤ {WEAK_PHASE_LIMIT} rad");
    }

    let mut spectrum = object_phase.data().mapv(|v| Complex::new(v, T::zero()));
    fft2(&mut spectrum);
    let transfer = ifftshift(ctf.values());
    let nyquist = n / 2;
    Zip::indexed(&mut spectrum).and(&transfer).par_for_each(|(i, j), v, c| {
        *v = if i == nyquist || j == nyquist { Complex::new(T::zero(), T::zero()) } else { *v * *c * T::lit(-2.0) };
    });
    ifft2(&mut spectrum);
    let residue = spectrum.iter().fold(0.0f64, |m, v| m.max(v.im.as_f64().abs()));
    log::debug!("weak-phase image imaginary residue {residue:e}");
    let image = spectrum.mapv(|v| T::one() + v.re);
    RasterImage::new(image, object_phase.pixel_size(), Plane::Image, ValueKind::Intensity)
}

/// Angular sector removed from angular reductions: all directions within
/// `half_angle` of the line through the origin at `axis_angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeExclusion<T> {
    pub half_angle: T,
    pub axis_angle: T,
}

impl<T: Real> WedgeExclusion<T> {
    pub fn new(half_angle: T, axis_angle: T) -> Result<Self> {
        if !(half_angle >= T::zero()) || !(half_angle < T::FRAC_PI_2()) {
            return Err(LppError::validation(format!("wedge half-angle must lie in [0, π/2), got {half_angle}")));
        }
        if !axis_angle.is_finite() {
            return Err(LppError::validation("wedge axis must be finite"));
        }
        Ok(Self { half_angle, axis_angle })
    }

    pub fn none() -> Self {
        Self { half_angle: T::zero(), axis_angle: T::zero() }
    }

    /// Whether the direction `(s_x, s_y)` falls inside the wedge.
    pub fn excludes(&self, sx: T, sy: T) -> bool {
        if self.half_angle == T::zero() || (sx == T::zero() && sy == T::zero()) {
            return false;
        }
        let (sin_a, cos_a) = self.axis_angle.sin_cos();
        let along = (sx * cos_a + sy * sin_a).abs();
        let across = (-sx * sin_a + sy * cos_a).abs();
        across.atan2(along) < self.half_angle
    }
}

/// Radially binned profile; `s[b] = b·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile<T> {
    pub s: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> RadialProfile<T> {
    pub fn new(s: Vec<T>, values: Vec<T>) -> Result<Self> {
        if s.len() != values.len() || s.is_empty() {
            return Err(LppError::validation("profile needs equally many positions and values, at least one"));
        }
        Ok(Self { s, values })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Spacing of the radial samples.
    pub fn step(&self) -> T {
        if self.s.len() > 1 {
            self.s[1] - self.s[0]
        } else {
            T::zero()
        }
    }
}

#[derive(Clone, Copy)]
enum Reduction {
    Rms,
    Mean,
}

/// Root-mean-square over angle in one-step-wide radial bins of a DC-centered
/// frequency raster, skipping the wedge.
pub fn rms_angular_average<T: Real>(map: &RasterImage<T>, wedge: &WedgeExclusion<T>) -> Result<RadialProfile<T>> {
    angular_reduce(map, wedge, Reduction::Rms)
}

/// Plain mean over angle, binned like [`rms_angular_average`].
pub fn angular_mean<T: Real>(map: &RasterImage<T>, wedge: &WedgeExclusion<T>) -> Result<RadialProfile<T>> {
    angular_reduce(map, wedge, Reduction::Mean)
}

fn angular_reduce<T: Real>(
    map: &RasterImage<T>,
    wedge: &WedgeExclusion<T>,
    reduction: Reduction,
) -> Result<RadialProfile<T>> {
    if !(wedge.half_angle >= T::zero()) || !(wedge.half_angle < T::FRAC_PI_2()) {
        return Err(LppError::validation("wedge half-angle must lie in [0, π/2)"));
    }
    let (h, w) = map.data().dim();
    let (cy, cx) = (h / 2, w / 2);
    let bins = cy.min(cx);
    let mut sums = vec![0.0f64; bins];
    let mut counts = vec![0usize; bins];
    // Row-major sequential accumulation keeps the result independent of threading.
    for ((i, j), &v) in map.data().indexed_iter() {
        let dy = i as f64 - cy as f64;
        let dx = j as f64 - cx as f64;
        let b = (dx * dx + dy * dy).sqrt().round() as usize;
        if b >= bins || wedge.excludes(T::lit(dx), T::lit(dy)) {
            continue;
        }
        let v = v.as_f64();
        sums[b] += match reduction {
            Reduction::Rms => v * v,
            Reduction::Mean => v,
        };
        counts[b] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(LppError::validation(format!("radial bin {empty} is empty after wedge exclusion")));
    }
    let step = map.pixel_size();
    let s = (0..bins).map(|b| T::from_len(b) * step).collect();
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&sum, &c)| {
            let m = sum / c as f64;
            T::lit(match reduction {
                Reduction::Rms => m.sqrt(),
                Reduction::Mean => m,
            })
        })
        .collect();
    RadialProfile::new(s, values)
}

/// Dark stripes the laser leaves in the frequency plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MisalignmentSignature<T> {
    pub stripe_count: usize,
    /// Stripe centers along the frequency axis perpendicular to the laser (1/m).
    pub positions: Vec<T>,
    /// Half-width of each stripe (1/m).
    pub half_widths: Vec<T>,
}

/// Locates the stripes along which the laser phase acts in the power spectrum.
///
/// A power spectrum cannot tell `s` from `−s`, so the laser line at the
/// perpendicular frequency `v` shows up at both `±v`. The standing-wave phase is
/// averaged over one period along the laser axis at the beam position; a stripe is
/// a connected run of `v` where the larger of the averages at `±v` exceeds
/// `e⁻²` of its maximum.
pub fn misalignment_signature<T: Real>(
    align: &PlateAlignment<T>,
    mode: &LaserMode<T>,
    focal_length: T,
    beam: &ElectronBeam<T>,
    grid: &FrequencyGrid<T>,
) -> Result<MisalignmentSignature<T>> {
    let scale = (beam.wavelength() * focal_length).as_f64();
    let x0 = -align.transverse_offset.as_f64();
    let period = mode.wavelength().as_f64() / 2.0;
    let samples = 16;
    let mean_phase = |v: f64| -> f64 {
        let y = v * scale - align.lateral_offset.as_f64();
        (0..samples)
            .map(|k| {
                let x = x0 + period * (k as f64 + 0.5) / samples as f64;
                phase_profile(T::lit(x), T::lit(y), mode).as_f64()
            })
            .sum::<f64>()
            / samples as f64
    };
    let half = (grid.size / 2) as isize;
    let step = grid.step.as_f64();
    let vs: Vec<f64> = (-half..half).map(|i| i as f64 * step).collect();
    let signal: Vec<f64> = vs.iter().map(|&v| mean_phase(v).max(mean_phase(-v))).collect();
    let peak = signal.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(MisalignmentSignature { stripe_count: 0, positions: vec![], half_widths: vec![] });
    }
    let threshold = peak * (-2.0f64).exp();
    let crossing = |a: usize, b: usize| {
        let t = (threshold - signal[a]) / (signal[b] - signal[a]);
        vs[a] + t * (vs[b] - vs[a])
    };
    let mut positions = Vec::new();
    let mut half_widths = Vec::new();
    let mut i = 0;
    while i < signal.len() {
        if signal[i] > threshold {
            let start = i;
            while i + 1 < signal.len() && signal[i + 1] > threshold {
                i += 1;
            }
            let lo = if start > 0 { crossing(start - 1, start) } else { vs[start] };
            let hi = if i + 1 < signal.len() { crossing(i, i + 1) } else { vs[i] };
            positions.push(T::lit(0.5 * (lo + hi)));
            half_widths.push(T::lit(0.5 * (hi - lo)));
        }
        i += 1;
    }
    Ok(MisalignmentSignature { stripe_count: positions.len(), positions, half_widths })
}

/// DC-centered power spectrum `|F[image − mean]|²` as a frequency raster.
pub fn power_spectrum<T: Real>(image: &RasterImage<T>) -> Result<RasterImage<T>> {
    let (h, w) = image.data().dim();
    if h != w {
        return Err(LppError::GridMismatch(format!("power spectrum needs a square image, got {w}x{h}")));
    }
    let mean = image.mean();
    let mut spectrum = image.data().mapv(|v| Complex::new(v - mean, T::zero()));
    fft2(&mut spectrum);
    let power = fftshift(&spectrum.mapv(|v| v.norm_sqr()));
    RasterImage::new(power, T::one() / (T::from_len(w) * image.pixel_size()), Plane::Frequency, ValueKind::Intensity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam() -> ElectronBeam<f64> {
        ElectronBeam::from_kilovolts(80.0).unwrap()
    }

    fn optics(defocus: f64) -> OpticsConfig<f64> {
        OpticsConfig::new(0.02, defocus, 0.0, DEFAULT_ENVELOPE_RADIUS).unwrap()
    }

    #[test]
    fn aberration_zero_at_origin_and_cs_sign() {
        let b = beam();
        assert_eq!(aberration_phase(0.0, &optics(880e-9), &b), 0.0);
        let cs_only = OpticsConfig::new(0.02, 0.0, 2.7e-3, DEFAULT_ENVELOPE_RADIUS).unwrap();
        for s in [1e8, 1e9, 3e9] {
            assert!(aberration_phase(s, &cs_only, &b) > 0.0);
        }
    }

    #[test]
    fn laser_phase_maps_axis_and_envelope() {
        let b = beam();
        let mode = LaserMode::new(1064e-9, 0.026, 0.0, 0.3).unwrap();
        let align = PlateAlignment::centered();
        assert!((laser_phase_of_frequency(0.0, 0.0, &mode, &align, 0.02, &b) - 0.3).abs() < 1e-15);
        let s0 = mode.waist() / (b.wavelength() * 0.02);
        let eta = laser_phase_of_frequency(0.0, s0, &mode, &align, 0.02, &b);
        assert!((eta - 0.3 * (-2.0f64).exp()).abs() < 1e-12);
        let shifted = PlateAlignment::new(1064e-9 / 4.0, 0.0, 0.0).unwrap();
        assert!(laser_phase_of_frequency(0.0, 0.0, &mode, &shifted, 0.02, &b) < 1e-5);
    }

    #[test]
    fn alignment_validation() {
        assert!(PlateAlignment::new(0.0, 0.0, std::f64::consts::PI).is_err());
        assert!(PlateAlignment::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(OpticsConfig::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(OpticsConfig::new(0.02, 0.0, -1.0, 1.0).is_err());
        assert!(WedgeExclusion::new(std::f64::consts::FRAC_PI_2, 0.0).is_err());
    }

    #[test]
    fn undersampled_map_is_rejected() {
        let b = beam();
        let mode = LaserMode::new(1064e-9, 0.026, 0.0, 0.3).unwrap();
        let limit = max_frequency_step(&mode, 0.02, &b);
        let grid = FrequencyGrid::new(64, limit * 1.5).unwrap();
        let err = ctf_map(&grid, &optics(0.0), &mode, &PlateAlignment::centered(), &b, true).unwrap_err();
        assert!(matches!(err, LppError::Sampling { required: 96, .. }), "{err:?}");
    }

    #[test]
    fn constant_map_profile() {
        let map = RasterImage::<f64>::filled(32, 32, -0.4, 1.0, Plane::Frequency, ValueKind::Ctf).unwrap();
        let p = rms_angular_average(&map, &WedgeExclusion::none()).unwrap();
        assert!(p.values.iter().all(|v| (v - 0.4).abs() < 1e-15));
        let wedge = WedgeExclusion::new(0.3, 0.2).unwrap();
        let q = rms_angular_average(&map, &wedge).unwrap();
        assert_eq!(p.values.len(), q.values.len());
    }

    #[test]
    fn wedge_geometry() {
        let w = WedgeExclusion::new(15f64.to_radians(), 0.0).unwrap();
        assert!(w.excludes(1.0, 0.1));
        assert!(w.excludes(-1.0, -0.1));
        assert!(!w.excludes(1.0, 0.5));
        assert!(!w.excludes(0.0, 0.0));
    }

    #[test]
    fn weak_phase_grid_mismatch() {
        let b = beam();
        let mode = LaserMode::new(1064e-9, 0.026, 0.0, 0.3).unwrap();
        let grid = FrequencyGrid::for_image(2048, 0.31e-9).unwrap();
        let map = ctf_map(&grid, &optics(0.0), &mode, &PlateAlignment::centered(), &b, true).unwrap();
        let wrong = RasterImage::filled(32, 32, 0.0, 0.31e-9, Plane::Image, ValueKind::Phase).unwrap();
        assert!(matches!(simulate_weak_phase_image(&wrong, &map), Err(LppError::GridMismatch(_))));
        let pitch = RasterImage::filled(2048, 2048, 0.0, 0.5e-9, Plane::Image, ValueKind::Phase).unwrap();
        assert!(simulate_weak_phase_image(&pitch, &map).is_err());
    }
}
