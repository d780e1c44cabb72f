//! Physical constants in SI units, CODATA 2018 recommended values.

/// Planck constant (J·s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);

/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Electron rest mass (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Vacuum electric permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Electron rest energy m_e c² (J).
pub const ELECTRON_REST_ENERGY: f64 = ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_energy_in_kev() {
        let kev = ELECTRON_REST_ENERGY / ELEMENTARY_CHARGE / 1e3;
        assert!((kev - 510.998_950).abs() < 1e-5, "{kev}");
    }
}
