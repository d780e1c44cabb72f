//! Electron kinematics, standing-wave laser mode geometry and the laser-induced
//! electron phase.
//!
//! Units are SI throughout. Intensities are antinode intensities of the
//! standing wave; the field entering the ponderomotive potential is the
//! traveling-wave-equivalent amplitude `E² = 2I/(ε₀c)`.

use crate::constants::{
    ELECTRON_MASS, ELECTRON_REST_ENERGY, ELEMENTARY_CHARGE, HBAR, PLANCK, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY,
};
use crate::error::{LppError, Result};
use crate::scalar::Real;

/// Upper bound on the mode numerical aperture for which the paraxial phase
/// profile is accepted.
pub const MAX_NUMERICAL_APERTURE: f64 = 0.1;

/// A monoenergetic electron beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronBeam<T> {
    voltage: T,
    wavelength: T,
    wavenumber: T,
    speed: T,
}

impl<T: Real> ElectronBeam<T> {
    /// Beam accelerated through `kilovolts`.
    pub fn from_kilovolts(kilovolts: T) -> Result<Self> {
        let kv = kilovolts.as_f64();
        if !(kv > 0.0) || !kv.is_finite() {
            return Err(LppError::validation(format!("accelerating voltage must be positive, got {kv} kV")));
        }
        let energy = ELEMENTARY_CHARGE * kv * 1e3;
        let wavelength = PLANCK * SPEED_OF_LIGHT / (energy * (energy + 2.0 * ELECTRON_REST_ENERGY)).sqrt();
        let gamma = 1.0 + energy / ELECTRON_REST_ENERGY;
        let speed = SPEED_OF_LIGHT * (1.0 - 1.0 / (gamma * gamma)).sqrt();
        Ok(Self {
            voltage: T::lit(kv * 1e3),
            wavelength: T::lit(wavelength),
            wavenumber: T::lit(2.0 * std::f64::consts::PI / wavelength),
            speed: T::lit(speed),
        })
    }

    /// Accelerating voltage in volts.
    pub fn voltage(&self) -> T {
        self.voltage
    }

    /// Relativistic de Broglie wavelength (m).
    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    /// Angular wavenumber 2π/λ (rad/m).
    pub fn wavenumber(&self) -> T {
        self.wavenumber
    }

    /// Speed (m/s).
    pub fn speed(&self) -> T {
        self.speed
    }
}

/// Shorthand for [`ElectronBeam::from_kilovolts`].
pub fn electron_beam_from_voltage<T: Real>(kilovolts: T) -> Result<ElectronBeam<T>> {
    ElectronBeam::from_kilovolts(kilovolts)
}

/// A standing-wave Gaussian laser mode crossing the electron beam.
///
/// Only the primary quantities are stored; waist, Rayleigh range and κ are
/// recomputed from them on access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserMode<T> {
    wavelength: T,
    numerical_aperture: T,
    tilt: T,
    peak_phase: T,
}

impl<T: Real> LaserMode<T> {
    pub fn new(wavelength: T, numerical_aperture: T, tilt: T, peak_phase: T) -> Result<Self> {
        if !(wavelength > T::zero()) || !wavelength.is_finite() {
            return Err(LppError::validation(format!("laser wavelength must be positive, got {wavelength}")));
        }
        if !(numerical_aperture > T::zero()) || numerical_aperture > T::lit(MAX_NUMERICAL_APERTURE) {
            return Err(LppError::validation(format!(
                "numerical aperture must lie in (0, {MAX_NUMERICAL_APERTURE}], got {numerical_aperture}"
            )));
        }
        if !(peak_phase >= T::zero()) || !peak_phase.is_finite() {
            return Err(LppError::validation(format!("peak phase must be non-negative, got {peak_phase}")));
        }
        if !tilt.is_finite() {
            return Err(LppError::validation("tilt must be finite"));
        }
        Ok(Self { wavelength, numerical_aperture, tilt, peak_phase })
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    pub fn numerical_aperture(&self) -> T {
        self.numerical_aperture
    }

    /// Deviation from perpendicular incidence (rad).
    pub fn tilt(&self) -> T {
        self.tilt
    }

    /// Phase η₀ imparted at the antinode on the mode axis for zero tilt (rad).
    pub fn peak_phase(&self) -> T {
        self.peak_phase
    }

    /// 1/e² intensity radius at the focus, λ/(π·NA).
    pub fn waist(&self) -> T {
        self.wavelength / (T::PI() * self.numerical_aperture)
    }

    /// λ/(π·NA²).
    pub fn rayleigh_range(&self) -> T {
        self.wavelength / (T::PI() * self.numerical_aperture * self.numerical_aperture)
    }

    /// 2/NA².
    pub fn kappa(&self) -> T {
        T::lit(2.0) / (self.numerical_aperture * self.numerical_aperture)
    }

    /// Angular wavenumber of the laser light, 2π/λ.
    pub fn wavenumber(&self) -> T {
        T::lit(2.0) * T::PI() / self.wavelength
    }

    pub fn with_peak_phase(self, peak_phase: T) -> Result<Self> {
        Self::new(self.wavelength, self.numerical_aperture, self.tilt, peak_phase)
    }

    pub fn with_numerical_aperture(self, numerical_aperture: T) -> Result<Self> {
        Self::new(self.wavelength, numerical_aperture, self.tilt, self.peak_phase)
    }

    pub fn with_tilt(self, tilt: T) -> Result<Self> {
        Self::new(self.wavelength, self.numerical_aperture, tilt, self.peak_phase)
    }
}

/// Shorthand for [`LaserMode::new`].
pub fn laser_mode_geometry<T: Real>(
    wavelength: T,
    numerical_aperture: T,
    tilt: T,
    peak_phase: T,
) -> Result<LaserMode<T>> {
    LaserMode::new(wavelength, numerical_aperture, tilt, peak_phase)
}

/// Laser field strength, in both intensity and power form.
///
/// The two are tied by the standing-wave relation: two counter-propagating
/// Gaussian beams of power `P` each interfere to an antinode intensity of
/// `8P/(π w₀²)`, four times the single-beam peak intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserField<T> {
    mode: LaserMode<T>,
    antinode_intensity: T,
    circulating_power: T,
}

impl<T: Real> LaserField<T> {
    /// Relative tolerance of the intensity/power consistency check in [`LaserField::new`].
    pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

    pub fn new(mode: LaserMode<T>, antinode_intensity: T, circulating_power: T) -> Result<Self> {
        if !(antinode_intensity >= T::zero()) || !(circulating_power >= T::zero()) {
            return Err(LppError::validation("intensity and power must be non-negative"));
        }
        let expected = Self::intensity_for_power(&mode, circulating_power).as_f64();
        let given = antinode_intensity.as_f64();
        let scale = expected.abs().max(given.abs()).max(f64::MIN_POSITIVE);
        let tol = Self::CONSISTENCY_TOLERANCE.max(T::epsilon().as_f64() * 8.0);
        if (expected - given).abs() > tol * scale {
            return Err(LppError::validation(format!(
                "antinode intensity {given:e} W/m² is inconsistent with circulating power (expects {expected:e} W/m²)"
            )));
        }
        Ok(Self { mode, antinode_intensity, circulating_power })
    }

    pub fn from_circulating_power(mode: LaserMode<T>, circulating_power: T) -> Result<Self> {
        Self::new(mode, Self::intensity_for_power(&mode, circulating_power), circulating_power)
    }

    pub fn from_antinode_intensity(mode: LaserMode<T>, antinode_intensity: T) -> Result<Self> {
        let w0 = mode.waist();
        let power = antinode_intensity * T::PI() * w0 * w0 / T::lit(8.0);
        Self::new(mode, antinode_intensity, power)
    }

    fn intensity_for_power(mode: &LaserMode<T>, power: T) -> T {
        let w0 = mode.waist();
        T::lit(8.0) * power / (T::PI() * w0 * w0)
    }

    pub fn mode(&self) -> &LaserMode<T> {
        &self.mode
    }

    pub fn antinode_intensity(&self) -> T {
        self.antinode_intensity
    }

    pub fn circulating_power(&self) -> T {
        self.circulating_power
    }
}

/// Squared traveling-wave field amplitude for intensity `I`: 2I/(ε₀c).
pub fn field_amplitude_squared<T: Real>(intensity: T) -> T {
    intensity * T::lit(2.0 / (VACUUM_PERMITTIVITY * SPEED_OF_LIGHT))
}

/// Ponderomotive potential energy U = e²E²λ²/(16π²mc²) (J).
pub fn ponderomotive_potential<T: Real>(field_amplitude: T, wavelength: T) -> Result<T> {
    if !(field_amplitude >= T::zero()) || !(wavelength > T::zero()) {
        return Err(LppError::validation("field amplitude must be non-negative and wavelength positive"));
    }
    Ok(ponderomotive_from_field_squared(field_amplitude * field_amplitude, wavelength))
}

fn ponderomotive_from_field_squared<T: Real>(field_squared: T, wavelength: T) -> T {
    let pi = std::f64::consts::PI;
    let coupling =
        ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (16.0 * pi * pi * ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT);
    field_squared * wavelength * wavelength * T::lit(coupling)
}

/// Antinode phase η₀ for a given antinode intensity (rad).
///
/// Integrates the ponderomotive potential along a straight electron path through
/// the Gaussian transverse profile, ∫exp(−2z²/w₀²)dz = w₀√(π/2), and divides by
/// ħv. The result is strictly proportional to the intensity.
pub fn peak_phase_from_intensity<T: Real>(
    antinode_intensity: T,
    mode: &LaserMode<T>,
    beam: &ElectronBeam<T>,
) -> Result<T> {
    if !(antinode_intensity >= T::zero()) || !antinode_intensity.is_finite() {
        return Err(LppError::validation(format!("intensity must be non-negative, got {antinode_intensity}")));
    }
    let potential = ponderomotive_from_field_squared(field_amplitude_squared(antinode_intensity), mode.wavelength());
    let path = mode.waist() * T::lit((std::f64::consts::PI / 2.0).sqrt());
    Ok(potential * path / (T::lit(HBAR) * beam.speed()))
}

/// Electron phase imparted at `(x, y)` in the plate plane (rad).
///
/// `x` runs along the laser axis and `y` along the electron-free transverse
/// direction, both measured from the mode focus at an antinode. The tilt damps
/// the standing-wave modulation through `exp(−θ²κ(1+X²))`.
pub fn phase_profile<T: Real>(x: T, y: T, mode: &LaserMode<T>) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let big_x = x / mode.rayleigh_range();
    let big_y = y / mode.waist();
    let q = one + big_x * big_x;
    let kappa = mode.kappa();
    let envelope = T::lit(0.5) * (-two * big_y * big_y / q).exp() / q.sqrt();
    let damping = (-mode.tilt() * mode.tilt() * kappa * q).exp();
    let argument = two * big_x / q * big_y * big_y + two * kappa * big_x - T::lit(1.5) * big_x.atan();
    let modulation = damping * q.powf(T::lit(-0.25)) * argument.cos();
    mode.peak_phase() * envelope * (one + modulation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_mode() -> LaserMode<f64> {
        LaserMode::new(1064e-9, 0.026, 0.0, 1.0).unwrap()
    }

    #[test]
    fn wavenumber_times_wavelength_is_two_pi() {
        for kv in [10.0, 80.0, 120.0, 300.0] {
            let b = ElectronBeam::from_kilovolts(kv).unwrap();
            let prod: f64 = b.wavenumber() * b.wavelength();
            assert!((prod - 2.0 * std::f64::consts::PI).abs() < 1e-14);
            assert!(b.speed() < SPEED_OF_LIGHT);
        }
    }

    #[test]
    fn rejects_non_positive_voltage() {
        assert!(ElectronBeam::<f64>::from_kilovolts(0.0).unwrap_err().is_validation());
        assert!(ElectronBeam::<f64>::from_kilovolts(-5.0).is_err());
        assert!(ElectronBeam::<f64>::from_kilovolts(f64::NAN).is_err());
    }

    #[test]
    fn mode_validation() {
        assert!(LaserMode::new(1064e-9, 0.0, 0.0, 1.0).is_err());
        assert!(LaserMode::new(1064e-9, 0.11, 0.0, 1.0).is_err());
        assert!(LaserMode::new(1064e-9, 0.1, 0.0, 1.0).is_ok());
        assert!(LaserMode::new(-1.0, 0.02, 0.0, 1.0).is_err());
        assert!(LaserMode::new(1064e-9, 0.02, 0.0, -0.1).is_err());
    }

    #[test]
    fn kappa_is_two_over_na_squared() {
        let m = reference_mode();
        assert!((m.kappa() - 2_958.579_881_656_8).abs() < 1e-9);
        let r = m.waist() / m.rayleigh_range();
        assert!((r - 0.026).abs() < 1e-16);
    }

    #[test]
    fn laser_field_consistency() {
        let m = reference_mode();
        let f = LaserField::from_circulating_power(m, 29.6e3).unwrap();
        // ≈ 44 GW/cm² for 29.6 kW circulating.
        assert!((f.antinode_intensity() / 1e13 - 44.4).abs() < 0.2, "{}", f.antinode_intensity());
        let back = LaserField::from_antinode_intensity(m, f.antinode_intensity()).unwrap();
        assert!((back.circulating_power() - 29.6e3).abs() < 1e-6);
        assert!(LaserField::new(m, f.antinode_intensity() * 1.01, 29.6e3).is_err());
        assert!(LaserField::new(m, -1.0, 0.0).is_err());
    }

    #[test]
    fn ponderomotive_scaling() {
        assert_eq!(ponderomotive_potential(0.0, 1064e-9).unwrap(), 0.0);
        let u1: f64 = ponderomotive_potential(1e9, 1064e-9).unwrap();
        let u2 = ponderomotive_potential(2e9, 1064e-9).unwrap();
        assert!((u2 / u1 - 4.0).abs() < 1e-14);
        assert!(ponderomotive_potential(1e9, 0.0).is_err());
    }

    #[test]
    fn phase_profile_antinode_and_envelope() {
        let m = reference_mode();
        assert!((phase_profile(0.0, 0.0, &m) - 1.0).abs() < 1e-15);
        let w0 = m.waist();
        for y in [0.3 * w0, w0, 2.0 * w0] {
            let ratio = phase_profile(0.0, y, &m) / phase_profile(0.0, 0.0, &m);
            assert!((ratio - (-2.0 * y * y / (w0 * w0)).exp()).abs() < 1e-14);
        }
        // Node a quarter wavelength away.
        let node = phase_profile(1064e-9 / 4.0, 0.0, &m);
        assert!(node.abs() < 1e-5, "{node}");
    }

    #[test]
    fn tilt_damps_modulation() {
        let m = reference_mode();
        let node = |t: f64| phase_profile(1064e-9 / 4.0, 0.0, &m.with_tilt(t).unwrap());
        let mut prev = node(0.0);
        for t in [0.002, 0.005, 0.01, 0.02, 0.05] {
            let v = node(t);
            assert!(v > prev, "node phase should rise as modulation is damped");
            prev = v;
        }
        assert!((prev - 0.5).abs() < 1e-3);
    }

    #[test]
    fn works_in_single_precision() {
        let m = LaserMode::<f32>::new(1064e-9, 0.026, 0.0, 0.5).unwrap();
        assert!((phase_profile(0.0f32, 0.0, &m) - 0.5).abs() < 1e-6);
        let b = ElectronBeam::<f32>::from_kilovolts(80.0).unwrap();
        assert!((b.wavelength() / 4.1757e-12 - 1.0).abs() < 1e-4);
    }
}
