//! Flat run configuration with unit-suffixed keys.

use std::path::Path;

use lpp_core::ctf::{OpticsConfig, PlateAlignment, WedgeExclusion, DEFAULT_ENVELOPE_RADIUS};
use lpp_core::detector::CoincidenceParams;
use lpp_core::estimation::DefocusSign;
use lpp_core::physics::{ElectronBeam, LaserMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Every key is optional in the file; missing keys take the values below
/// (80 kV, 1064 nm, NA 0.026, f = 20 mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub voltage_kv: f64,
    pub lambda_l_nm: f64,
    pub na: f64,
    pub eta0_deg: f64,
    pub tilt_rad: f64,
    pub f_mm: f64,
    pub magnification: f64,
    pub defocus_nm: f64,
    /// "overfocus" or "underfocus"; defaults to the sign of `defocus_nm`.
    pub defocus_sign: Option<String>,
    pub cs_mm: f64,
    pub astigmatism_nm: f64,
    pub astigmatism_angle_deg: f64,
    /// Half-maximum radius of the envelope in 1/nm.
    pub envelope_radius_per_nm: f64,
    /// Laser plane offset for Ronchigrams; `None` means −(π/4)(k/k_L²).
    pub delta_mm: Option<f64>,
    /// Fit Δ together with η₀, NA and Θ when fitting Ronchigrams.
    pub fit_delta: bool,
    pub plate_offset_nm: f64,
    pub plate_lateral_um: f64,
    pub plate_rotation_deg: f64,
    pub theta_cl: f64,
    /// Image and CTF grid size (pixels per side).
    pub grid_n: usize,
    /// Specimen-level pixel size for micrographs and CTF maps.
    pub pixel_size_nm: f64,
    pub detector_n: usize,
    pub detector_pixel_um: f64,
    pub detector_center_px: [f64; 2],
    pub detector_rotation_deg: f64,
    pub counts_per_pixel: f64,
    pub object_rms_rad: f64,
    pub wedge_deg: f64,
    pub spectrum_sigma_px: f64,
    pub zero_sigma_bins: f64,
    pub fixed_cs: bool,
    pub outer_iterations: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            voltage_kv: 80.0,
            lambda_l_nm: 1064.0,
            na: 0.026,
            eta0_deg: 18.0,
            tilt_rad: 0.0,
            f_mm: 20.0,
            magnification: 50.0,
            defocus_nm: -500.0,
            defocus_sign: None,
            cs_mm: 2.7,
            astigmatism_nm: 0.0,
            astigmatism_angle_deg: 0.0,
            envelope_radius_per_nm: DEFAULT_ENVELOPE_RADIUS * 1e-9,
            delta_mm: None,
            fit_delta: false,
            plate_offset_nm: 0.0,
            plate_lateral_um: 0.0,
            plate_rotation_deg: 0.0,
            theta_cl: 0.0,
            grid_n: 2048,
            pixel_size_nm: 0.31,
            detector_n: 768,
            detector_pixel_um: 3.5,
            detector_center_px: [0.0, 0.0],
            detector_rotation_deg: 0.0,
            counts_per_pixel: 100.0,
            object_rms_rad: 0.1,
            wedge_deg: 15.0,
            spectrum_sigma_px: 2.0,
            zero_sigma_bins: 1.0,
            fixed_cs: false,
            outer_iterations: 5,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn beam(&self) -> Result<ElectronBeam<f64>> {
        Ok(ElectronBeam::from_kilovolts(self.voltage_kv)?)
    }

    pub fn laser_wavelength(&self) -> f64 {
        self.lambda_l_nm * 1e-9
    }

    pub fn focal_length(&self) -> f64 {
        self.f_mm * 1e-3
    }

    pub fn mode(&self) -> Result<LaserMode<f64>> {
        Ok(LaserMode::new(self.laser_wavelength(), self.na, self.tilt_rad, self.eta0_deg.to_radians())?)
    }

    pub fn optics(&self) -> Result<OpticsConfig<f64>> {
        let cfg = OpticsConfig::new(
            self.focal_length(),
            self.defocus_nm * 1e-9,
            self.cs_mm * 1e-3,
            self.envelope_radius_per_nm * 1e9,
        )?;
        if self.astigmatism_nm != 0.0 {
            return Ok(cfg.with_astigmatism(self.astigmatism_nm * 1e-9, self.astigmatism_angle_deg.to_radians())?);
        }
        Ok(cfg)
    }

    pub fn alignment(&self) -> Result<PlateAlignment<f64>> {
        Ok(PlateAlignment::new(
            self.plate_offset_nm * 1e-9,
            self.plate_lateral_um * 1e-6,
            self.plate_rotation_deg.to_radians(),
        )?)
    }

    /// The symmetric CTF form is exact only for a centered, unrotated plate.
    pub fn symmetric_ctf(&self) -> bool {
        self.plate_offset_nm == 0.0 && self.plate_lateral_um == 0.0 && self.plate_rotation_deg == 0.0
    }

    pub fn wedge(&self) -> Result<WedgeExclusion<f64>> {
        Ok(WedgeExclusion::new(self.wedge_deg.to_radians(), self.plate_rotation_deg.to_radians())?)
    }

    pub fn coincidence(&self) -> Result<CoincidenceParams<f64>> {
        Ok(CoincidenceParams::new(self.theta_cl)?)
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size_nm * 1e-9
    }

    pub fn defocus_sign(&self) -> Result<DefocusSign> {
        match self.defocus_sign.as_deref() {
            Some("overfocus") => Ok(DefocusSign::Overfocus),
            Some("underfocus") => Ok(DefocusSign::Underfocus),
            Some(other) => {
                Err(CliError::Config(format!("defocus_sign must be \"overfocus\" or \"underfocus\", got {other:?}")))
            }
            None if self.defocus_nm < 0.0 => Ok(DefocusSign::Overfocus),
            None => Ok(DefocusSign::Underfocus),
        }
    }

    /// Checks every value against the owning type's rules without computing anything.
    pub fn validate(&self) -> Result<()> {
        self.beam()?;
        self.mode()?;
        self.optics()?;
        self.alignment()?;
        self.wedge()?;
        self.coincidence()?;
        self.defocus_sign()?;
        let positive = [
            ("magnification", self.magnification),
            ("pixel_size_nm", self.pixel_size_nm),
            ("detector_pixel_um", self.detector_pixel_um),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("counts_per_pixel", self.counts_per_pixel),
            ("object_rms_rad", self.object_rms_rad),
            ("spectrum_sigma_px", self.spectrum_sigma_px),
            ("zero_sigma_bins", self.zero_sigma_bins),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.grid_n < 8 || self.detector_n < 8 {
            return Err(CliError::Config("grid_n and detector_n must be at least 8".into()));
        }
        if self.outer_iterations == 0 {
            return Err(CliError::Config("outer_iterations must be at least 1".into()));
        }
        if let Some(d) = self.delta_mm {
            if d == 0.0 || !d.is_finite() {
                return Err(CliError::Config(format!("delta_mm must be finite and nonzero, got {d}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"voltage_kv": 300, "focal_mm": 3}"#).unwrap_err();
        assert!(err.to_string().contains("focal_mm"), "{err}");
        let cfg = RunConfig::from_json(r#"{"voltage_kv": 300}"#).unwrap();
        assert_eq!(cfg.voltage_kv, 300.0);
        assert_eq!(cfg.na, 0.026);
    }

    #[test]
    fn invalid_values_fail_validation() {
        let cfg = RunConfig { na: 0.0, ..RunConfig::default() };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let cfg = RunConfig { defocus_sign: Some("up".into()), ..RunConfig::default() };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }
}
