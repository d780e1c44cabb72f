//! The subcommands. Each one computes all of its results before writing any file.

use std::path::{Path, PathBuf};

use lpp_core::ctf::{ctf_map, rms_angular_average, simulate_weak_phase_image, FrequencyGrid};
use lpp_core::detector::{apply_coincidence_loss_image, sample_poisson_counts};
use lpp_core::estimation::{
    analyze_phase_scan, analyze_phase_series, fit_ctf, fit_ronchigram, CtfFit, PhaseScanResult, RonchigramFit,
    RonchigramHints, ThonOptions,
};
use lpp_core::propagation::{lower_bound_offset, synthesize_ronchigram, DetectorGrid, RonchigramSetup};
use lpp_core::{Plane, RasterImage, ValueKind};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::export::{encode_pgm, encode_png, parse_profile_csv, profile_csv, Abscissa, Scaling};
use crate::raster_io::{encode_mrc, encode_raster, read_raster};

/// Output encoding selected with `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Raster,
    Mrc,
    Csv,
    Png,
    Pgm,
}

/// A file to be written, named relative to the output directory.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self { name: name.into(), bytes }
    }

    fn json(name: &str, value: &impl Serialize) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable report");
        bytes.push(b'\n');
        Self::new(name, bytes)
    }
}

/// Checks that `format` can encode a raster, before any work is done.
pub fn check_raster_format(format: Format) -> Result<()> {
    if format == Format::Csv {
        return Err(CliError::Config("--format csv applies to profiles; rasters need raster, mrc, png or pgm".into()));
    }
    Ok(())
}

fn raster_artifact(stem: &str, image: &RasterImage<f64>, format: Format, scaling: Scaling) -> Result<Artifact> {
    Ok(match format {
        Format::Raster => Artifact::new(format!("{stem}.lppr"), encode_raster(image)),
        Format::Mrc => Artifact::new(format!("{stem}.mrc"), encode_mrc(image)),
        Format::Png => Artifact::new(format!("{stem}.png"), encode_png(image, scaling)?),
        Format::Pgm => Artifact::new(format!("{stem}.pgm"), encode_pgm(image, scaling)),
        Format::Csv => return Err(CliError::Config("rasters cannot be written as CSV".into())),
    })
}

/// Expected counts → coincidence loss → Poisson draw, or the noiseless image
/// when the dose is zero.
fn record(image: &RasterImage<f64>, cfg: &RunConfig, seed: u64) -> Result<RasterImage<f64>> {
    if cfg.counts_per_pixel == 0.0 {
        return Ok(image.clone());
    }
    let expected = apply_coincidence_loss_image(&image.map(|v| cfg.counts_per_pixel * v), &cfg.coincidence()?)?;
    Ok(sample_poisson_counts(&expected, seed)?)
}

pub fn simulate_ronchigram(cfg: &RunConfig, format: Format, scaling: Scaling) -> Result<Vec<Artifact>> {
    let beam = cfg.beam()?;
    let delta = match cfg.delta_mm {
        Some(d) => d * 1e-3,
        None => lower_bound_offset(&beam, cfg.laser_wavelength())?,
    };
    let setup = RonchigramSetup::new(beam, cfg.mode()?, delta, cfg.focal_length(), cfg.magnification)?;
    let grid = DetectorGrid::centered(cfg.detector_n, cfg.detector_n, cfg.detector_pixel_um * 1e-6)
        .with_center((cfg.detector_center_px[0], cfg.detector_center_px[1]))
        .with_rotation(cfg.detector_rotation_deg.to_radians());
    let ideal = synthesize_ronchigram(&setup, &grid)?;
    let counts = record(&ideal, cfg, cfg.seed)?;
    Ok(vec![raster_artifact("ronchigram", &counts, format, scaling)?])
}

/// Gaussian random phase object with the configured RMS.
fn random_object(cfg: &RunConfig) -> Result<RasterImage<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.object_rms_rad).map_err(|e| CliError::Config(e.to_string()))?;
    let data = Array2::from_shape_fn((cfg.grid_n, cfg.grid_n), |_| normal.sample(&mut rng));
    Ok(RasterImage::new(data, cfg.pixel_size(), Plane::Image, ValueKind::Phase)?)
}

fn map_for(cfg: &RunConfig) -> Result<lpp_core::ctf::CtfMap<f64>> {
    let grid = FrequencyGrid::for_image(cfg.grid_n, cfg.pixel_size())?;
    Ok(ctf_map(&grid, &cfg.optics()?, &cfg.mode()?, &cfg.alignment()?, &cfg.beam()?, cfg.symmetric_ctf())?)
}

pub fn simulate_image(cfg: &RunConfig, format: Format, scaling: Scaling) -> Result<Vec<Artifact>> {
    let map = map_for(cfg)?;
    let object = random_object(cfg)?;
    let image = simulate_weak_phase_image(&object, &map)?;
    let counts = record(&image, cfg, cfg.seed.wrapping_add(1))?;
    Ok(vec![raster_artifact("image", &counts, format, scaling)?])
}

pub fn ctf_map_command(cfg: &RunConfig, format: Format, scaling: Scaling) -> Result<Vec<Artifact>> {
    let map = map_for(cfg)?.to_raster();
    let profile = rms_angular_average(&map, &cfg.wedge()?)?;
    Ok(vec![
        raster_artifact("ctf_map", &map, format, scaling)?,
        Artifact::new("rms_profile.csv", profile_csv(&profile, Abscissa::FrequencyPerNm)?.into_bytes()),
    ])
}

pub fn rms_profile(cfg: &RunConfig, input: Option<&Path>) -> Result<Vec<Artifact>> {
    let map = match input {
        Some(path) => read_raster(path)?,
        None => map_for(cfg)?.to_raster(),
    };
    if map.plane() != Plane::Frequency {
        log::warn!("input is tagged {:?}; treating its pixel size as the frequency step", map.plane());
    }
    let profile = rms_angular_average(&map, &cfg.wedge()?)?;
    Ok(vec![Artifact::new("rms_profile.csv", profile_csv(&profile, Abscissa::FrequencyPerNm)?.into_bytes())])
}

#[derive(Debug, Serialize)]
struct RonchigramReport {
    eta0_deg: f64,
    numerical_aperture: f64,
    theta_cl: f64,
    /// Lower bound only when Δ came from the default offset and was held fixed.
    eta0_is_lower_bound: bool,
    delta_mm: f64,
    /// Δ fitted jointly with η₀ rather than held fixed.
    delta_fitted: bool,
    fringe_period_um: f64,
    wavevector_per_um: [f64; 2],
    center_px: [f64; 2],
    rotation_deg: f64,
    background_counts: f64,
    residual_norm: f64,
    objective_history: Vec<f64>,
    dead_pixels: usize,
    wavevector_from_hints: bool,
}

impl RonchigramReport {
    fn new(fit: &RonchigramFit, lower_bound: bool) -> Self {
        Self {
            eta0_deg: fit.peak_phase.to_degrees(),
            numerical_aperture: fit.numerical_aperture,
            theta_cl: fit.theta_cl,
            eta0_is_lower_bound: lower_bound,
            delta_mm: fit.delta * 1e3,
            delta_fitted: fit.delta_fitted,
            fringe_period_um: fit.fringe_period() * 1e6,
            wavevector_per_um: [fit.wavevector.0 * 1e-6, fit.wavevector.1 * 1e-6],
            center_px: [fit.center.0, fit.center.1],
            rotation_deg: fit.rotation.to_degrees(),
            background_counts: fit.background,
            residual_norm: fit.residual_norm,
            objective_history: fit.objective_history.clone(),
            dead_pixels: fit.dead_pixels,
            wavevector_from_hints: fit.wavevector_from_hints,
        }
    }
}

pub fn fit_ronchigram_command(cfg: &RunConfig, input: &Path, mask: Option<&Path>) -> Result<Vec<Artifact>> {
    let image = read_raster(input)?;
    let mut hints = RonchigramHints::new(cfg.beam()?, cfg.laser_wavelength(), cfg.focal_length(), cfg.magnification);
    hints.delta = cfg.delta_mm.map(|d| d * 1e-3);
    hints.fit_delta = cfg.fit_delta;
    hints.numerical_aperture = cfg.na;
    hints.theta_cl = cfg.theta_cl;
    hints.outer_iterations = cfg.outer_iterations;
    if cfg.eta0_deg > 0.0 {
        hints.peak_phase = cfg.eta0_deg.to_radians();
    }
    if let Some(path) = mask {
        let m = read_raster(path)?;
        if m.data().dim() != image.data().dim() {
            return Err(CliError::Config(format!(
                "mask is {}×{} but the image is {}×{}",
                m.width(),
                m.height(),
                image.width(),
                image.height()
            )));
        }
        hints.dead_pixel_mask = Some(m.data().mapv(|v| v != 0.0));
    }
    let fit = fit_ronchigram(&image, &hints)?;
    Ok(vec![Artifact::json(
        "ronchigram_fit.json",
        &RonchigramReport::new(&fit, cfg.delta_mm.is_none() && !cfg.fit_delta),
    )])
}

fn thon_options(cfg: &RunConfig) -> Result<ThonOptions> {
    let mut options = ThonOptions::new(cfg.defocus_sign()?);
    options.wedge = cfg.wedge()?;
    options.spectrum_sigma = cfg.spectrum_sigma_px;
    options.zeros.sigma_bins = cfg.zero_sigma_bins;
    if cfg.fixed_cs {
        options.fixed_spherical_aberration = Some(cfg.cs_mm * 1e-3);
    }
    Ok(options)
}

#[derive(Debug, Serialize)]
struct CtfReport {
    defocus_nm: f64,
    cs_mm: f64,
    constant_phase_deg: f64,
    quartic_coeff: f64,
    quadratic_coeff: f64,
    ellipse_ratio: f64,
    ellipse_orientation_deg: f64,
    zeros_per_nm: Vec<f64>,
    assigned_phases_rad: Vec<f64>,
    residual_rms_rad: f64,
    covariance: [[f64; 3]; 3],
}

impl From<&CtfFit> for CtfReport {
    fn from(fit: &CtfFit) -> Self {
        Self {
            defocus_nm: fit.defocus * 1e9,
            cs_mm: fit.spherical_aberration * 1e3,
            constant_phase_deg: fit.constant_phase.to_degrees(),
            quartic_coeff: fit.quartic_coeff,
            quadratic_coeff: fit.quadratic_coeff,
            ellipse_ratio: fit.ellipse.ratio,
            ellipse_orientation_deg: fit.ellipse.orientation.to_degrees(),
            zeros_per_nm: fit.zero_locations.iter().map(|s| s * 1e-9).collect(),
            assigned_phases_rad: fit.assigned_phases.clone(),
            residual_rms_rad: fit.residual_rms,
            covariance: fit.covariance,
        }
    }
}

pub fn fit_ctf_command(cfg: &RunConfig, input: &Path) -> Result<Vec<Artifact>> {
    let options = thon_options(cfg)?;
    let image = read_raster(input)?;
    let fit = fit_ctf(&image, &cfg.beam()?, &options)?;
    Ok(vec![Artifact::json("ctf_fit.json", &CtfReport::from(&fit))])
}

#[derive(Debug, Serialize)]
struct ScanReport {
    peak_to_peak_deg: f64,
    period_nm: f64,
    positions_nm: Vec<f64>,
    phases_deg: Vec<f64>,
}

impl From<&PhaseScanResult> for ScanReport {
    fn from(r: &PhaseScanResult) -> Self {
        Self {
            peak_to_peak_deg: r.peak_to_peak.to_degrees(),
            period_nm: r.period * 1e9,
            positions_nm: r.positions.iter().map(|x| x * 1e9).collect(),
            phases_deg: r.phases.iter().map(|p| p.to_degrees()).collect(),
        }
    }
}

/// Reads a scan table. `position_nm,phase_deg` rows are analyzed directly;
/// `position_nm,image` rows name micrographs (relative to the table) that are
/// fitted first. Returns the report and the micrographs that were read.
pub fn scan_analyze(cfg: &RunConfig, input: &Path) -> Result<(Vec<Artifact>, Vec<PathBuf>)> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let header = text.lines().next().unwrap_or("").trim();
    match header {
        "position_nm,phase_deg" => {
            let (_, x, y) = parse_profile_csv(&text, input)?;
            let x: Vec<f64> = x.iter().map(|v| v * 1e-9).collect();
            let y: Vec<f64> = y.iter().map(|v| v.to_radians()).collect();
            let result = analyze_phase_series(&x, &y)?;
            Ok((vec![Artifact::json("scan.json", &ScanReport::from(&result))], Vec::new()))
        }
        "position_nm,image" => {
            let options = thon_options(cfg)?;
            let beam = cfg.beam()?;
            let base = input.parent().unwrap_or(Path::new("."));
            let mut rows = Vec::new();
            for (n, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
                let (x, file) = line.split_once(',').ok_or_else(|| {
                    CliError::Config(format!("{}: line {}: expected two columns", input.display(), n + 1))
                })?;
                let x: f64 = x.trim().parse().map_err(|_| {
                    CliError::Config(format!("{}: line {}: cannot parse position {x:?}", input.display(), n + 1))
                })?;
                rows.push((x * 1e-9, base.join(file.trim())));
            }
            if let Some((_, missing)) = rows.iter().find(|(_, p)| !p.is_file()) {
                return Err(CliError::Config(format!("scan image {} does not exist", missing.display())));
            }
            let mut scan = Vec::with_capacity(rows.len());
            for (x, path) in &rows {
                scan.push((*x, fit_ctf(&read_raster(path)?, &beam, &options)?));
            }
            let result = analyze_phase_scan(&scan)?;
            let images = rows.into_iter().map(|(_, p)| p).collect();
            Ok((vec![Artifact::json("scan.json", &ScanReport::from(&result))], images))
        }
        other => Err(CliError::Config(format!(
            "{}: header must be \"position_nm,phase_deg\" or \"position_nm,image\", got {other:?}",
            input.display()
        ))),
    }
}
