//! Fitting Ronchigrams for the laser peak phase, mode NA and the detector's
//! coincidence loss.

use ndarray::{Array2, Zip};
use num_complex::Complex;
use std::f64::consts::PI;

use super::optimize::{golden_section, nelder_mead};
use super::periodogram::dominant_frequency_2d;
use crate::error::{LppError, Result};
use crate::fft::{fft2, ifft2, signed_index};
use crate::physics::{ElectronBeam, LaserMode, MAX_NUMERICAL_APERTURE};
use crate::propagation::{lower_bound_offset, synthesize_ronchigram, DetectorGrid, RonchigramSetup};
use crate::raster::RasterImage;

/// Dead-pixel threshold in local median absolute deviations.
pub const DEAD_PIXEL_MADS: f64 = 6.0;
/// Pixels farther than this many (detector-mapped) waists from the laser axis
/// count as background.
pub const BACKGROUND_WAISTS: f64 = 2.5;

/// Prior knowledge and starting values for [`fit_ronchigram`].
#[derive(Debug, Clone, PartialEq)]
pub struct RonchigramHints {
    pub beam: ElectronBeam<f64>,
    pub laser_wavelength: f64,
    pub focal_length: f64,
    /// Only used to predict the fringe vector when the image shows no fringes.
    pub magnification: f64,
    /// Plate offset Δ (m). `None` uses −(π/4)(k/k_L²), which makes the fitted η₀
    /// a lower bound.
    pub delta: Option<f64>,
    /// Fit |Δ| jointly with (η₀, NA, Θ), starting from `delta`. The sign of Δ is
    /// kept. η₀ and Δ are strongly correlated, so the result depends on the
    /// starting point more than a fixed-Δ fit does.
    pub fit_delta: bool,
    pub peak_phase: f64,
    pub numerical_aperture: f64,
    pub theta_cl: f64,
    /// Pixels known to be bad.
    pub dead_pixel_mask: Option<Array2<bool>>,
    /// Also search for outliers automatically (see [`remove_dead_pixels`]).
    pub detect_dead_pixels: bool,
    pub outer_iterations: usize,
    /// Relative objective spread at which the simplex stage stops.
    pub tolerance: f64,
}

impl RonchigramHints {
    pub fn new(beam: ElectronBeam<f64>, laser_wavelength: f64, focal_length: f64, magnification: f64) -> Self {
        Self {
            beam,
            laser_wavelength,
            focal_length,
            magnification,
            delta: None,
            fit_delta: false,
            peak_phase: 0.5,
            numerical_aperture: 0.02,
            theta_cl: 0.0,
            dead_pixel_mask: None,
            detect_dead_pixels: true,
            outer_iterations: 5,
            tolerance: 1e-6,
        }
    }
}

/// Result of [`fit_ronchigram`].
#[derive(Debug, Clone, PartialEq)]
pub struct RonchigramFit {
    /// Fringe spatial frequency on the detector (cycles/m), `(x, y)`.
    pub wavevector: (f64, f64),
    /// Laser focus relative to the grid center (pixels, `(x, y)`).
    pub center: (f64, f64),
    pub peak_phase: f64,
    pub numerical_aperture: f64,
    pub theta_cl: f64,
    /// RMS difference between normalized image and model.
    pub residual_norm: f64,
    /// Plate offset used for the model (m).
    pub delta: f64,
    /// Whether `delta` was fitted (joint fit) or held fixed.
    pub delta_fitted: bool,
    /// Laser axis direction on the detector (rad).
    pub rotation: f64,
    /// Detected background counts per pixel.
    pub background: f64,
    /// Objective after each outer repetition.
    pub objective_history: Vec<f64>,
    pub dead_pixels: usize,
    /// Whether the fringe vector came from the hints because no fringes were found.
    pub wavevector_from_hints: bool,
}

impl RonchigramFit {
    /// Fringe period on the detector (m).
    pub fn fringe_period(&self) -> f64 {
        1.0 / self.wavevector.0.hypot(self.wavevector.1)
    }
}

fn median(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Median of the 5×5 window around `(i, j)`, mirrored at the image edges so the
/// window stays centered.
fn window_median(data: &Array2<f64>, i: usize, j: usize, buf: &mut Vec<f64>) -> f64 {
    let (h, w) = data.dim();
    let mirror = |k: isize, n: usize| -> usize {
        let n = n as isize;
        let k = if k < 0 {
            -k
        } else if k >= n {
            2 * (n - 1) - k
        } else {
            k
        };
        k.clamp(0, n - 1) as usize
    };
    buf.clear();
    for dy in -2..=2 {
        for dx in -2..=2 {
            buf.push(data[[mirror(i as isize + dy, h), mirror(j as isize + dx, w)]]);
        }
    }
    median(buf)
}

/// Replaces outliers by their 5×5 median.
///
/// A pixel is an outlier when it is flagged in `mask` or deviates from its 5×5
/// median by more than six median absolute deviations of those residuals over
/// the same window. The rule assumes shot noise; on noise-free images it also
/// flags extrema of smooth structure, so callers can switch detection off.
/// Returns the cleaned data and the number of replaced pixels.
pub fn remove_dead_pixels(data: &Array2<f64>, mask: Option<&Array2<bool>>) -> Result<(Array2<f64>, usize)> {
    clean_pixels(data, mask, true)
}

fn clean_pixels(data: &Array2<f64>, mask: Option<&Array2<bool>>, detect: bool) -> Result<(Array2<f64>, usize)> {
    if let Some(m) = mask {
        if m.dim() != data.dim() {
            return Err(LppError::GridMismatch("dead-pixel mask does not match the image".into()));
        }
    }
    let mut buf = Vec::with_capacity(25);
    let med = Array2::from_shape_fn(data.dim(), |(i, j)| window_median(data, i, j, &mut buf));
    let resid = (data - &med).mapv(f64::abs);
    let mut cleaned = data.clone();
    let mut replaced = 0;
    for ((i, j), v) in cleaned.indexed_iter_mut() {
        let flagged = mask.is_some_and(|m| m[[i, j]]);
        let r = resid[[i, j]];
        let outlier =
            detect && r > 1e-9 * med[[i, j]].abs() && r > DEAD_PIXEL_MADS * window_median(&resid, i, j, &mut buf);
        if flagged || outlier {
            *v = med[[i, j]];
            replaced += 1;
        }
    }
    Ok((cleaned, replaced))
}

/// Normalized detected intensity for relative incident intensity `r` when the
/// background detects `b` counts and `p = bΘ`: `(1 − (1 − p)^r)/p`.
fn coincidence_response(r: f64, p: f64) -> f64 {
    if p == 0.0 {
        r
    } else {
        -(r * (-p).ln_1p()).exp_m1() / p
    }
}

struct Problem<'a> {
    data: &'a Array2<f64>,
    beam: ElectronBeam<f64>,
    laser_wavelength: f64,
    focal_length: f64,
    /// |Δ|/(Mf) measured from the fringe period.
    plate_scale: f64,
    pixel_size: f64,
    rotation: f64,
}

#[derive(Debug, Clone, Copy)]
struct State {
    center: (f64, f64),
    eta0: f64,
    na: f64,
    delta: f64,
    /// Background counts times Θ.
    p: f64,
}

impl Problem<'_> {
    fn model(&self, s: &State) -> Result<Array2<f64>> {
        let mode = LaserMode::new(self.laser_wavelength, s.na, 0.0, s.eta0)?;
        let magnification = s.delta.abs() / (self.plate_scale * self.focal_length);
        let setup = RonchigramSetup::new(self.beam, mode, s.delta, self.focal_length, magnification)?;
        let (h, w) = self.data.dim();
        let grid = DetectorGrid::centered(w, h, self.pixel_size).with_center(s.center).with_rotation(self.rotation);
        let image = synthesize_ronchigram(&setup, &grid)?;
        let p = s.p;
        Ok(image.into_data().mapv(|r| coincidence_response(r, p)))
    }

    fn objective(&self, s: &State) -> f64 {
        if !(s.eta0 >= 0.0 && s.eta0 < PI)
            || !(s.na > 0.0 && s.na <= MAX_NUMERICAL_APERTURE)
            || !(0.0..1.0).contains(&s.p)
            || !(s.delta.is_finite() && s.delta != 0.0)
        {
            return f64::INFINITY;
        }
        match self.model(s) {
            Ok(m) => {
                let mut total = 0.0;
                Zip::from(self.data).and(&m).for_each(|&d, &v| total += (d - v) * (d - v));
                total
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn waist_pixels(&self, na: f64) -> f64 {
        self.laser_wavelength / (PI * na) / self.plate_scale / self.pixel_size
    }

    fn fringe_pixels(&self) -> f64 {
        self.laser_wavelength / 2.0 / self.plate_scale / self.pixel_size
    }
}

/// Translation (x, y) in pixels that best aligns `model` with `data`, by
/// circular cross-correlation.
fn correlation_shift(data: &Array2<f64>, model: &Array2<f64>) -> (f64, f64) {
    let centered = |a: &Array2<f64>| {
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        a.mapv(|v| Complex::new(v - mean, 0.0))
    };
    let mut a = centered(data);
    let mut b = centered(model);
    fft2(&mut a);
    fft2(&mut b);
    Zip::from(&mut a).and(&b).for_each(|x, y| *x *= y.conj());
    ifft2(&mut a);
    let (h, w) = data.dim();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for ((i, j), v) in a.indexed_iter() {
        if v.re > best.2 {
            best = (i, j, v.re);
        }
    }
    (signed_index(best.1, w) as f64, signed_index(best.0, h) as f64)
}

/// Fits a Ronchigram recorded at plate offset Δ.
///
/// Steps: dead-pixel removal; provisional median normalization; fringe vector
/// from the continuous Fourier peak; model generation; center from
/// cross-correlation with the model; background from pixels far from the laser
/// axis; then `outer_iterations` rounds of line searches over the center
/// (along, then across the laser axis, each within ± one fringe period) followed
/// by a simplex search over (η₀, NA, Θ). Every stage starts from the best point
/// so far, so the objective never increases between rounds.
pub fn fit_ronchigram(image: &RasterImage<f64>, hints: &RonchigramHints) -> Result<RonchigramFit> {
    if hints.outer_iterations == 0 {
        return Err(LppError::validation("need at least one outer iteration"));
    }
    if !(hints.laser_wavelength > 0.0) || !(hints.focal_length > 0.0) || !(hints.magnification > 0.0) {
        return Err(LppError::validation("laser wavelength, focal length and magnification must be positive"));
    }
    let pixel_size = image.pixel_size();
    let (cleaned, dead_pixels) = clean_pixels(image.data(), hints.dead_pixel_mask.as_ref(), hints.detect_dead_pixels)?;
    let mut all: Vec<f64> = cleaned.iter().copied().collect();
    let provisional_level = median(&mut all);
    if !(provisional_level > 0.0) {
        return Err(LppError::estimation("image median is not positive; cannot normalize"));
    }
    let provisional = cleaned.mapv(|v| v / provisional_level);

    let delta = match hints.delta {
        Some(d) if d != 0.0 && d.is_finite() => d,
        Some(d) => return Err(LppError::validation(format!("plate offset must be non-zero, got {d}"))),
        None => lower_bound_offset(&hints.beam, hints.laser_wavelength)?,
    };
    let (q, wavevector_from_hints) = match dominant_frequency_2d(&provisional) {
        Ok((fx, fy)) => ((fx / pixel_size, fy / pixel_size), false),
        Err(LppError::Estimation(msg)) => {
            log::info!("no fringes found ({msg}); using the fringe period implied by the hints");
            let period = hints.laser_wavelength / 2.0 * hints.magnification * hints.focal_length / delta.abs();
            ((1.0 / period, 0.0), true)
        }
        Err(e) => return Err(e),
    };
    let q_norm = q.0.hypot(q.1);
    let rotation = q.1.atan2(q.0);
    let problem = Problem {
        data: &provisional,
        beam: hints.beam,
        laser_wavelength: hints.laser_wavelength,
        focal_length: hints.focal_length,
        plate_scale: hints.laser_wavelength / 2.0 * q_norm,
        pixel_size,
        rotation,
    };
    if problem.fringe_pixels() < crate::propagation::MIN_PIXELS_PER_FRINGE {
        return Err(LppError::estimation(format!(
            "fringes span only {:.2} pixels; the model cannot be sampled",
            problem.fringe_pixels()
        )));
    }

    let mut state = State {
        center: (0.0, 0.0),
        eta0: hints.peak_phase.clamp(0.0, PI - 1e-3),
        na: hints.numerical_aperture.clamp(1e-4, MAX_NUMERICAL_APERTURE),
        delta,
        p: 0.0,
    };
    let initial_model = problem.model(&state)?;
    state.center = correlation_shift(&provisional, &initial_model);

    // Background from pixels well outside the laser stripe.
    let waist_px = problem.waist_pixels(state.na);
    let (h, w) = provisional.dim();
    let (sin_r, cos_r) = rotation.sin_cos();
    let mut background: Vec<f64> = Vec::new();
    for ((i, j), &v) in cleaned.indexed_iter() {
        let dx = j as f64 - w as f64 / 2.0 - state.center.0;
        let dy = i as f64 - h as f64 / 2.0 - state.center.1;
        if (-dx * sin_r + dy * cos_r).abs() > BACKGROUND_WAISTS * waist_px {
            background.push(v);
        }
    }
    let background = if background.len() >= 64 {
        background.iter().sum::<f64>() / background.len() as f64
    } else {
        log::warn!("only {} background pixels; normalizing by the image median", background.len());
        provisional_level
    };
    if !(background > 0.0) {
        return Err(LppError::estimation("background level is not positive"));
    }
    let normalized = cleaned.mapv(|v| v / background);
    let problem = Problem { data: &normalized, ..problem };
    state.p = (hints.theta_cl * background).clamp(0.0, 0.95);

    let period = problem.fringe_pixels();
    let mut current = problem.objective(&state);
    if !current.is_finite() {
        return Err(LppError::Fit {
            message: "initial model could not be evaluated".into(),
            diagnostics: format!("{state:?}"),
        });
    }
    let mut history = Vec::with_capacity(hints.outer_iterations);
    for _ in 0..hints.outer_iterations {
        for (ax, ay) in [(cos_r, sin_r), (-sin_r, cos_r)] {
            let base = state.center;
            let line = golden_section(
                |t| problem.objective(&State { center: (base.0 + t * ax, base.1 + t * ay), ..state }),
                -period,
                period,
                Some(0.0),
                0.01,
            );
            if line.value < current {
                let t = line.x[0];
                state.center = (base.0 + t * ax, base.1 + t * ay);
                current = line.value;
            }
        }
        // |Δ| is searched on a log scale.
        let sign = state.delta.signum();
        let mut x0 = vec![state.eta0, state.na, state.p];
        let mut steps =
            vec![(0.2 * state.eta0).max(0.05), 0.1 * state.na, if state.p + 0.1 < 1.0 { 0.1 } else { -0.1 }];
        if hints.fit_delta {
            x0.push(state.delta.abs().ln());
            steps.push(0.2);
        }
        let unpack = |x: &[f64]| State {
            eta0: x[0],
            na: x[1],
            p: x[2],
            delta: if hints.fit_delta { sign * x[3].exp() } else { state.delta },
            ..state
        };
        let simplex = nelder_mead(|x| problem.objective(&unpack(x)), &x0, &steps, hints.tolerance, 400);
        if simplex.value < current {
            state = unpack(&simplex.x);
            current = simplex.value;
        }
        history.push(current);
    }

    let n = normalized.len() as f64;
    let fit = RonchigramFit {
        wavevector: q,
        center: state.center,
        peak_phase: state.eta0,
        numerical_aperture: state.na,
        theta_cl: state.p / background,
        residual_norm: (current / n).sqrt(),
        delta: state.delta,
        delta_fitted: hints.fit_delta,
        rotation,
        background,
        objective_history: history,
        dead_pixels,
        wavevector_from_hints,
    };
    if !(fit.peak_phase >= 0.0)
        || !(fit.numerical_aperture > 0.0 && fit.numerical_aperture <= MAX_NUMERICAL_APERTURE)
        || !fit.residual_norm.is_finite()
    {
        return Err(LppError::Fit {
            message: "fit left the valid parameter range".into(),
            diagnostics: format!("{fit:?}"),
        });
    }
    Ok(fit)
}

/// Mean intensity profiles across bright and dark fringes.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeProfiles {
    /// Distance from the laser axis on the detector (m).
    pub offsets: Vec<f64>,
    pub crest: Vec<f64>,
    pub trough: Vec<f64>,
    pub crest_count: usize,
    pub trough_count: usize,
}

/// Averages the image across `crests` adjacent bright fringes and `troughs`
/// adjacent dark fringes around the fitted laser focus.
///
/// Bright and dark are decided from the image itself by comparing the mean
/// intensity along the antinode line through the focus with the line half a
/// period away.
pub fn crest_trough_profiles(
    image: &RasterImage<f64>,
    fit: &RonchigramFit,
    crests: usize,
    troughs: usize,
) -> Result<FringeProfiles> {
    if crests == 0 || troughs == 0 {
        return Err(LppError::validation("need at least one crest and one trough"));
    }
    let data = image.data();
    let (h, w) = data.dim();
    let px = image.pixel_size();
    let period = fit.fringe_period() / px;
    let (sin_r, cos_r) = fit.rotation.sin_cos();
    let cx = w as f64 / 2.0 + fit.center.0;
    let cy = h as f64 / 2.0 + fit.center.1;
    let reach = (h.max(w) / 2) as isize;
    let offsets: Vec<f64> = (-reach..=reach).map(|v| v as f64).collect();

    let line_profile = |u: f64| -> Vec<Option<f64>> {
        offsets
            .iter()
            .map(|&v| {
                let x = cx + u * cos_r - v * sin_r;
                let y = cy + u * sin_r + v * cos_r;
                if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
                    return None;
                }
                let (i0, j0) = (y.floor() as usize, x.floor() as usize);
                let (i1, j1) = ((i0 + 1).min(h - 1), (j0 + 1).min(w - 1));
                let (fy, fx) = (y - i0 as f64, x - j0 as f64);
                Some(
                    (data[[i0, j0]] * (1.0 - fx) + data[[i0, j1]] * fx) * (1.0 - fy)
                        + (data[[i1, j0]] * (1.0 - fx) + data[[i1, j1]] * fx) * fy,
                )
            })
            .collect()
    };
    let near_axis_mean = |u: f64| {
        let p = line_profile(u);
        let vals: Vec<f64> = p.iter().zip(&offsets).filter(|(_, v)| v.abs() < 20.0).filter_map(|(x, _)| *x).collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    };
    let antinode_bright = near_axis_mean(0.0) >= near_axis_mean(period / 2.0);
    let (bright_phase, dark_phase) = if antinode_bright { (0.0, 0.5) } else { (0.5, 0.0) };

    let average = |phase: f64, count: usize| -> Vec<f64> {
        let first = -((count as f64 - 1.0) / 2.0).floor();
        let mut sums = vec![0.0; offsets.len()];
        let mut counts = vec![0usize; offsets.len()];
        for k in 0..count {
            let u = (first + k as f64 + phase) * period;
            for (idx, v) in line_profile(u).into_iter().enumerate() {
                if let Some(v) = v {
                    sums[idx] += v;
                    counts[idx] += 1;
                }
            }
        }
        sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect()
    };
    Ok(FringeProfiles {
        offsets: offsets.iter().map(|v| v * px).collect(),
        crest: average(bright_phase, crests),
        trough: average(dark_phase, troughs),
        crest_count: crests,
        trough_count: troughs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hot_pixel_is_replaced() {
        let mut data = Array2::from_shape_fn((20, 20), |(i, j)| 100.0 + ((i * 7 + j * 3) % 5) as f64);
        data[[10, 10]] = 5000.0;
        data[[3, 4]] = 0.0;
        let (clean, n) = remove_dead_pixels(&data, None).unwrap();
        assert_eq!(n, 2);
        assert!(clean[[10, 10]] < 110.0 && clean[[3, 4]] > 90.0);
    }

    #[test]
    fn noisy_smooth_image_is_untouched() {
        // Deterministic pseudo-noise of unit scale on a gentle ramp.
        let data = Array2::from_shape_fn((32, 32), |(i, j)| {
            let h = ((i * 73 + j * 151) % 97) as f64 / 97.0 - 0.5;
            100.0 + 0.2 * (i + j) as f64 + 3.0 * h
        });
        let (clean, n) = remove_dead_pixels(&data, None).unwrap();
        assert_eq!(n, 0);
        assert_eq!(clean, data);
    }

    #[test]
    fn response_limits() {
        assert_eq!(coincidence_response(1.3, 0.0), 1.3);
        assert!((coincidence_response(1.0, 0.6) - 1.0).abs() < 1e-15);
        let p = 1e-9;
        assert!((coincidence_response(2.0, p) - 2.0).abs() < 1e-8);
    }
}
