//! End-to-end acceptance checks. Prints one line per criterion and exits with a
//! failure status if any criterion misses its tolerance or time budget.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lpp_core::ctf::{
    aberration_phase_2d, ctf_map, envelope, misalignment_signature, rms_angular_average, simulate_weak_phase_image,
    FrequencyGrid, OpticsConfig, PlateAlignment, WedgeExclusion, DEFAULT_ENVELOPE_RADIUS,
};
use lpp_core::detector::{
    apply_coincidence_loss, apply_coincidence_loss_image, invert_coincidence_loss, sample_poisson_counts,
    CoincidenceParams,
};
use lpp_core::estimation::{
    analyze_phase_scan, analyze_phase_series, fit_ctf, fit_ronchigram, DefocusSign, RonchigramHints, ThonOptions,
};
use lpp_core::physics::{peak_phase_from_intensity, ElectronBeam, LaserMode};
use lpp_core::propagation::{
    contrast_maximizing_offsets, grating_fringe_contrast, lower_bound_offset, synthesize_ronchigram, DetectorGrid,
    RonchigramSetup,
};
use lpp_core::{LppError, Plane, RasterImage, ValueKind};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LASER: f64 = 1064e-9;
const NA: f64 = 0.026;
const FOCAL: f64 = 0.02;
const REFERENCE_PHASE_43GW_DEG: f64 = 38.0;

fn beam() -> ElectronBeam<f64> {
    ElectronBeam::from_kilovolts(80.0).unwrap()
}

fn mode(peak_deg: f64) -> LaserMode<f64> {
    LaserMode::new(LASER, NA, 0.0, peak_deg.to_radians()).unwrap()
}

struct Outcome {
    pass: bool,
    measured: String,
    tolerance: String,
}

fn outcome(pass: bool, measured: impl Into<String>, tolerance: impl Into<String>) -> Outcome {
    Outcome { pass, measured: measured.into(), tolerance: tolerance.into() }
}

fn run(id: u32, budget: Duration, check: impl FnOnce() -> Result<Outcome, LppError>) -> bool {
    let start = Instant::now();
    let result = check();
    let elapsed = start.elapsed();
    let (pass, line) = match result {
        Ok(o) => {
            let in_time = elapsed < budget;
            let pass = o.pass && in_time;
            (
                pass,
                format!(
                    "measured {} | tolerance {} | runtime {:.2?} (< {:?})",
                    o.measured, o.tolerance, elapsed, budget
                ),
            )
        }
        Err(e) => (false, format!("error: {e} | runtime {elapsed:.2?}")),
    };
    println!("criterion {id:>2} {} {line}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn mode_geometry() -> Result<Outcome, LppError> {
    let m = mode(0.0);
    let w = m.waist() / 13.03e-6 - 1.0;
    let z = m.rayleigh_range() / 501e-6 - 1.0;
    Ok(outcome(
        w.abs() < 0.01 && z.abs() < 0.02,
        format!("w0 = {:.4} um, zR = {:.1} um", m.waist() * 1e6, m.rayleigh_range() * 1e6),
        "w0 within 1% of 13.03 um, zR within 2% of 501 um",
    ))
}

fn offset_spacing() -> Result<Outcome, LppError> {
    let offsets = contrast_maximizing_offsets(&beam(), LASER, 4)?;
    let worst =
        offsets.iter().enumerate().map(|(j, d)| (d / (67.7e-3 * (j as f64 + 0.5)) - 1.0).abs()).fold(0.0, f64::max);
    Ok(outcome(
        worst < 0.02,
        format!(
            "Δ_max = {:.2?} mm (worst deviation {:.3}%)",
            offsets.iter().map(|d| d * 1e3).collect::<Vec<_>>(),
            worst * 100.0
        ),
        "67.7 mm·(j+1/2) within 2%",
    ))
}

/// Cosine fringe amplitude along the central row, positive when antinodes are dark.
fn axis_contrast(image: &RasterImage<f64>, per_fringe: f64) -> f64 {
    let row = image.height() / 2;
    let c = image.width() as f64 / 2.0;
    let n = image.width() as f64;
    -2.0 / n
        * image
            .data()
            .row(row)
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - 1.0) * (2.0 * PI * (j as f64 - c) / per_fringe).cos())
            .sum::<f64>()
}

/// Simulated contrast against Δ over one oscillation period, compared with the
/// two-term closed form. Deviations are relative to the closed-form amplitude
/// so that points near a contrast zero are not divided by zero.
fn ronchigram_oracle() -> Result<Outcome, LppError> {
    let b = beam();
    let (k, kl) = (b.wavenumber(), 2.0 * PI / LASER);
    let period = PI * k / (kl * kl);
    let per_fringe = 8.0;
    let mut worst_by_phase = Vec::new();
    for peak_deg in [15.0, 30.0, 38.0, 45.0] {
        let peak = f64::to_radians(peak_deg);
        let amplitude = lpp_core::propagation::analytic_fringe_contrast(peak, period / 4.0, k, kl)?.abs();
        let mut worst: f64 = 0.0;
        for j in 0..10 {
            let delta = (j as f64 + 0.5) / 10.0 * period;
            let setup = RonchigramSetup::new(b, mode(peak_deg), delta, FOCAL, 1.0)?;
            let px = setup.detector_fringe_period() / per_fringe;
            let image = synthesize_ronchigram(&setup, &DetectorGrid::centered(2048, 2048, px))?;
            let measured = axis_contrast(&image, per_fringe);
            let model = lpp_core::propagation::analytic_fringe_contrast(peak, delta, k, kl)?;
            worst = worst.max((measured - model).abs() / amplitude);
        }
        let exact = grating_fringe_contrast(peak, period / 4.0, k, kl)?;
        worst_by_phase.push((peak_deg, worst, exact / amplitude - 1.0));
    }
    let pass = worst_by_phase.iter().all(|(_, w, _)| *w < 0.05);
    let measured = worst_by_phase
        .iter()
        .map(|(p, w, g)| format!("{p}°: {:.2}% (all-orders sum vs closed form at peak {:+.2}%)", w * 100.0, g * 100.0))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(outcome(
        pass,
        format!("worst deviation over 10 Δ on 2048²: {measured}"),
        "5% of the closed-form amplitude for η₀ ≤ 45°",
    ))
}

fn ronchigram_round_trip() -> Result<Outcome, LppError> {
    let b = beam();
    let delta = lower_bound_offset(&b, LASER)?;
    let magnification = 50.0;
    let setup = RonchigramSetup::new(b, mode(38.0), delta, FOCAL, magnification)?;
    let px = setup.detector_fringe_period() / 4.5;
    let grid = DetectorGrid::centered(768, 768, px).with_center((3.3, -7.6)).with_rotation(0.12);
    let ideal = synthesize_ronchigram(&setup, &grid)?;
    let cl = CoincidenceParams::new(0.01)?;
    let detected = apply_coincidence_loss_image(&ideal.map(|v| 100.0 * v), &cl)?;
    let counts = sample_poisson_counts(&detected, 7)?;

    let hints = RonchigramHints::new(b, LASER, FOCAL, magnification);
    let fit = fit_ronchigram(&counts, &hints)?;
    let eta = fit.peak_phase.to_degrees();
    let monotone = fit.objective_history.windows(2).all(|w| w[1] <= w[0]);
    let pass = (eta - 38.0).abs() < 2.0
        && (fit.numerical_aperture / NA - 1.0).abs() < 0.05
        && (fit.theta_cl / 0.01 - 1.0).abs() < 0.2
        && monotone
        && fit.objective_history.len() == 5;
    Ok(outcome(
        pass,
        format!(
            "η₀ = {eta:.2}°, NA = {:.5}, Θ = {:.5}, objective {:?} (monotone: {monotone})",
            fit.numerical_aperture, fit.theta_cl, fit.objective_history
        ),
        "η₀ 38° ± 2°, NA 0.026 ± 5%, Θ 0.01 ± 20%, non-increasing over 5 rounds",
    ))
}

fn ctf_structure() -> Result<Outcome, LppError> {
    let b = beam();
    let step = 1.5e6;
    let grid = FrequencyGrid::new(1024, step)?;
    let optics = OpticsConfig::new(FOCAL, 0.0, 0.0, DEFAULT_ENVELOPE_RADIUS)?;
    let m = mode(18.0);
    let map = ctf_map(&grid, &optics, &m, &PlateAlignment::centered(), &b, true)?;
    let dc = map.values()[[512, 512]];
    let s0 = m.waist() / (b.wavelength() * FOCAL);
    let (mut total, mut count) = (0.0, 0usize);
    for ((i, j), v) in map.values().indexed_iter() {
        let (sx, sy) = grid.frequency(i, j);
        let s = sx.hypot(sy);
        if sy.abs() > 3.0 * s0 && s < 0.5e9 {
            total += v.norm() / envelope(s, &optics);
            count += 1;
        }
    }
    let plateau = total / count as f64;
    let signature = misalignment_signature(&PlateAlignment::centered(), &m, FOCAL, &b, &grid)?;
    let width = signature.half_widths.first().copied().unwrap_or(f64::NAN);
    let pass = dc.re == 0.0
        && dc.im == 0.0
        && (plateau / 0.31 - 1.0).abs() < 0.03
        && signature.stripe_count == 1
        && (width * 6e-9 - 1.0).abs() < 0.1;
    Ok(outcome(
        pass,
        format!("CTF(0) = {dc}, plateau |C|/E = {plateau:.4}, stripe half-width = 1/({:.3} nm)", 1e9 / width),
        "CTF(0) = 0 exactly, plateau 0.31 ± 3%, half-width (6 nm)⁻¹ ± 10%",
    ))
}

fn rms_plateaus() -> Result<Outcome, LppError> {
    let b = beam();
    let grid = FrequencyGrid::new(2048, 1.5e6)?;
    let optics = OpticsConfig::new(FOCAL, 0.0, 0.0, DEFAULT_ENVELOPE_RADIUS)?;
    let s1 = LASER / (4.0 * b.wavelength() * FOCAL);
    let s0 = mode(0.0).waist() / (b.wavelength() * FOCAL);
    let mut pass = true;
    let mut measured = Vec::new();
    for peak_deg in [18.0, 90.0] {
        let map = ctf_map(&grid, &optics, &mode(peak_deg), &PlateAlignment::centered(), &b, true)?;
        let profile = rms_angular_average(&map.to_raster(), &WedgeExclusion::none())?;
        let band = |lo: f64, hi: f64| {
            let v: Vec<f64> = profile
                .s
                .iter()
                .zip(&profile.values)
                .filter(|(s, _)| **s >= lo && **s <= hi)
                .map(|(s, v)| v / envelope(*s, &optics))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let sin = f64::to_radians(peak_deg).sin();
        let first = band(s1, 0.25 * s0) / sin;
        let second = band(2.0 * s0, 3.0 * s0) / sin;
        pass &= (first / 0.7 - 1.0).abs() < 0.1 && (second - 1.0).abs() < 0.03;
        measured.push(format!("{peak_deg}°: first {first:.3}·sin η₀, second {second:.3}·sin η₀"));
    }
    Ok(outcome(
        pass,
        format!("{} (bands [s₁, s₀/4] and [2s₀, 3s₀])", measured.join("; ")),
        "first 0.7·sin η₀ ± 10%, second sin η₀ ± 3%",
    ))
}

/// Weak-phase micrograph of a fixed Gaussian random object on 2048² at 0.31 nm
/// pixels, recorded with `dose` counts per pixel.
fn micrograph(
    optics: &OpticsConfig<f64>,
    peak_deg: f64,
    align: &PlateAlignment<f64>,
    symmetric: bool,
    dose: f64,
    seed: u64,
) -> Result<RasterImage<f64>, LppError> {
    let (n, px) = (2048, 0.31e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 0.1).unwrap();
    let object = Array2::from_shape_fn((n, n), |_| normal.sample(&mut rng));
    let object = RasterImage::new(object, px, Plane::Image, ValueKind::Phase)?;
    let grid = FrequencyGrid::for_image(n, px)?;
    let map = ctf_map(&grid, optics, &mode(peak_deg), align, &beam(), symmetric)?;
    let image = simulate_weak_phase_image(&object, &map)?;
    sample_poisson_counts(&image.map(|v| dose * v), seed)
}

/// Mean over azimuth of the radius where the aberration phase reaches `target`.
fn azimuth_mean_zero_radius(optics: &OpticsConfig<f64>, target: f64) -> f64 {
    let b = beam();
    let samples = 720;
    (0..samples)
        .map(|a| {
            let th = PI * a as f64 / samples as f64;
            let (mut lo, mut hi) = (1e7, 3e9);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if aberration_phase_2d(mid * th.cos(), mid * th.sin(), optics, &b) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .sum::<f64>()
        / samples as f64
}

fn thon_round_trip() -> Result<Outcome, LppError> {
    let optics =
        OpticsConfig::new(FOCAL, -500e-9, 2.7e-3, DEFAULT_ENVELOPE_RADIUS)?.with_astigmatism(0.04878 * 500e-9, 0.6)?;
    let options = ThonOptions::new(DefocusSign::Overfocus);
    let centered = PlateAlignment::centered();
    let off = fit_ctf(&micrograph(&optics, 0.0, &centered, true, 1000.0, 11)?, &beam(), &options)?;
    let on = fit_ctf(&micrograph(&optics, 18.0, &centered, true, 1000.0, 12)?, &beam(), &options)?;
    let dz_err = [&off, &on].iter().map(|f| (f.defocus / -500e-9 - 1.0).abs()).fold(0.0, f64::max);
    let shift = (off.constant_phase - on.constant_phase).to_degrees();
    let ring_err = off
        .zero_locations
        .iter()
        .take(4)
        .enumerate()
        .map(|(k, z)| (z / azimuth_mean_zero_radius(&optics, (k as f64 + 1.0) * PI) - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = dz_err < 0.03 && (shift - 18.0).abs() < 1.5 && ring_err < 0.002;
    Ok(outcome(
        pass,
        format!(
            "ΔZ = {:.1} / {:.1} nm, Δc = {shift:.2}°, ellipse ratio {:.4}, worst ring radius error {:.3}%",
            off.defocus * 1e9,
            on.defocus * 1e9,
            off.ellipse.ratio,
            ring_err * 100.0
        ),
        "ΔZ within 3%, Δc 18° ± 1.5°, ring radii within 0.2%",
    ))
}

fn phase_scan() -> Result<Outcome, LppError> {
    let optics = OpticsConfig::new(FOCAL, -500e-9, 2.7e-3, DEFAULT_ENVELOPE_RADIUS)?;
    let options = ThonOptions::new(DefocusSign::Overfocus);
    let count = 16;
    let mut scan = Vec::with_capacity(count);
    for i in 0..count {
        let x = i as f64 * (LASER / 2.0) / count as f64;
        let align = PlateAlignment::new(x, 0.0, 0.0)?;
        let image = micrograph(&optics, 18.0, &align, false, 1000.0, 100 + i as u64)?;
        scan.push((x, fit_ctf(&image, &beam(), &options)?));
    }
    let result = analyze_phase_scan(&scan)?;
    let ptp = result.peak_to_peak.to_degrees();
    let period_err = result.period / (LASER / 2.0) - 1.0;

    // Estimator identity on noiseless sinusoids.
    let x: Vec<f64> = (0..count).map(|i| i as f64 * (LASER / 2.0) / count as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.2 * (4.0 * PI * v / LASER + 0.4).sin() - 0.1).collect();
    let exact = analyze_phase_series(&x, &y)?;
    let identity_err = (exact.peak_to_peak - 0.4).abs();

    // Phase scales linearly with power; compare the two reported operating points.
    let per_watt: f64 = (18.0 / 4.4) / (38.0 / 7.4);
    let pass = period_err.abs() < 0.02 && (ptp - 18.0).abs() < 1.5 && identity_err < 1e-6;
    Ok(outcome(
        pass,
        format!(
            "period = {:.2} nm ({:+.2}%), peak-to-peak = {ptp:.3}°, identity error {identity_err:.1e}; \
             phase per watt 18°/4.4 W vs 38°/7.4 W ratio {per_watt:.3} (within 25%: {})",
            result.period * 1e9,
            period_err * 100.0,
            (per_watt - 1.0).abs() < 0.25
        ),
        "period λ_L/2 within 2%, peak-to-peak 18° ± 1.5°, identity to 1e-6",
    ))
}

fn coincidence_loss() -> Result<Outcome, LppError> {
    let mut worst: f64 = 0.0;
    for theta in [1e-4, 0.01, 0.3, 1.0] {
        let p = CoincidenceParams::new(theta)?;
        for i in 0..=990 {
            let product = i as f64 / 1000.0;
            let actual = product / theta;
            let back = invert_coincidence_loss(apply_coincidence_loss(actual, &p)?, &p)?;
            worst = worst.max((back - actual).abs() / actual.max(f64::MIN_POSITIVE));
            let detected = product / theta;
            let again = apply_coincidence_loss(invert_coincidence_loss(detected, &p)?, &p)?;
            worst = worst.max((again - detected).abs() / detected.max(f64::MIN_POSITIVE));
        }
    }
    let p = CoincidenceParams::new(0.02)?;
    let saturated = matches!(invert_coincidence_loss(50.0, &p), Err(LppError::Saturation { .. }));
    Ok(outcome(
        worst < 1e-10 && saturated,
        format!("worst relative round-trip error {worst:.2e}, saturation error at IΘ = 1: {saturated}"),
        "1e-10 relative over IΘ ∈ [0, 0.99]",
    ))
}

fn ctf_forms_agree() -> Result<Outcome, LppError> {
    let b = beam();
    let grid = FrequencyGrid::new(512, 1.5e6)?;
    let optics = OpticsConfig::new(FOCAL, -500e-9, 2.7e-3, DEFAULT_ENVELOPE_RADIUS)?.with_astigmatism(25e-9, 0.6)?;
    let m = mode(18.0);
    let symmetric = ctf_map(&grid, &optics, &m, &PlateAlignment::centered(), &b, true)?;
    let general = ctf_map(&grid, &optics, &m, &PlateAlignment::centered(), &b, false)?;
    let worst = symmetric.values().iter().zip(general.values()).map(|(a, c)| (a - c).norm()).fold(0.0, f64::max);
    Ok(outcome(worst <= 1e-12, format!("max |symmetric − general| = {worst:.2e} on 512²"), "1e-12"))
}

fn phase_from_intensity() -> Result<Outcome, LppError> {
    let b = beam();
    let m = LaserMode::new(LASER, LASER / (PI * 13e-6), 0.0, 1.0)?;
    let intensity = 43e13;
    let eta = peak_phase_from_intensity(intensity, &m, &b)?;
    let linear = [0.5, 2.0, 4.0, 8.0]
        .iter()
        .map(|f| peak_phase_from_intensity(f * intensity, &m, &b))
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .zip([0.5, 2.0, 4.0, 8.0])
        .all(|(v, f)| *v == f * eta);
    let deg = eta.to_degrees();
    Ok(outcome(
        (30.0..=50.0).contains(&deg) && linear,
        format!("η₀ = {deg:.2}° (model oracle ≈ 42.8°, measured reference {REFERENCE_PHASE_43GW_DEG}°), exactly linear: {linear}"),
        "η₀ in [30°, 50°], exact linearity",
    ))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        run(1, secs(1), mode_geometry),
        run(2, secs(1), offset_spacing),
        run(3, secs(120), ronchigram_oracle),
        run(4, secs(600), ronchigram_round_trip),
        run(5, secs(60), ctf_structure),
        run(6, secs(120), rms_plateaus),
        run(7, secs(600), thon_round_trip),
        run(8, secs(900), phase_scan),
        run(9, secs(1), coincidence_loss),
        run(10, secs(30), ctf_forms_agree),
        run(11, secs(1), phase_from_intensity),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
