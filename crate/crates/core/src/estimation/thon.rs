//! Thon-ring analysis: astigmatism correction, zero location and the
//! `ζ(s) = a·s⁴ + b·s² + c` phase fit.

use ndarray::Array2;
use std::f64::consts::{FRAC_PI_2, PI};

use super::optimize::nelder_mead;
use crate::ctf::{angular_mean, power_spectrum, RadialProfile, WedgeExclusion};
use crate::error::{LppError, Result};
use crate::physics::ElectronBeam;
use crate::raster::RasterImage;

/// Fitted astigmatism: rings are ellipses with major/minor `ratio ≥ 1` and the
/// major axis at `orientation ∈ [0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub ratio: f64,
    pub orientation: f64,
}

impl Ellipse {
    pub fn circle() -> Self {
        Self { ratio: 1.0, orientation: 0.0 }
    }

    /// Ring radius along azimuth `theta` relative to the minor semi-axis.
    pub fn radial_factor(&self, theta: f64) -> f64 {
        let rho2 = self.ratio * self.ratio;
        let e = (rho2 - 1.0) / (rho2 + 1.0);
        1.0 / (1.0 - e * (2.0 * (theta - self.orientation)).cos()).sqrt()
    }

    fn from_harmonics(p: f64, q: f64) -> Result<Self> {
        let e = p.hypot(q);
        if e >= 1.0 {
            return Err(LppError::estimation(format!("ring fit is not an ellipse (eccentricity term {e:.3})")));
        }
        let ratio = ((1.0 + e) / (1.0 - e)).sqrt();
        let orientation = if e == 0.0 { 0.0 } else { (0.5 * q.atan2(p) + FRAC_PI_2).rem_euclid(PI) };
        Ok(Self { ratio, orientation })
    }
}

/// Which side of focus the data were taken at; a single power spectrum cannot
/// tell, so it is supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefocusSign {
    /// ΔZ > 0: the aberration phase falls with frequency.
    Underfocus,
    /// ΔZ < 0: the aberration phase rises with frequency.
    Overfocus,
}

/// Settings for locating minima of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSearch {
    /// Gaussian pre-smoothing width in bins.
    pub sigma_bins: f64,
    /// Lowest frequency searched (1/m).
    pub s_min: f64,
    /// Highest frequency searched (1/m); `None` for the end of the profile.
    pub s_max: Option<f64>,
    /// Minimum depth of a minimum below the lower of its two flanking maxima,
    /// as a fraction of that maximum.
    pub min_prominence: f64,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        Self { sigma_bins: 1.0, s_min: 0.35e9, s_max: None, min_prominence: 0.05 }
    }
}

/// Settings for the full Thon-ring fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ThonOptions {
    pub defocus_sign: DefocusSign,
    /// Angular sector hidden by the laser stripe.
    pub wedge: WedgeExclusion<f64>,
    /// 2-D Gaussian smoothing of the power spectrum, in pixels.
    pub spectrum_sigma: f64,
    pub zeros: ZeroSearch,
    /// Number of azimuthal sectors used to trace each ring.
    pub sectors: usize,
    /// Known C_s (m); fixes the quartic coefficient when given.
    pub fixed_spherical_aberration: Option<f64>,
    /// Skip the astigmatism correction.
    pub assume_isotropic: bool,
}

impl ThonOptions {
    pub fn new(defocus_sign: DefocusSign) -> Self {
        Self {
            defocus_sign,
            wedge: WedgeExclusion::new(15f64.to_radians(), 0.0).expect("valid default wedge"),
            spectrum_sigma: 2.0,
            zeros: ZeroSearch::default(),
            sectors: 72,
            fixed_spherical_aberration: None,
            assume_isotropic: false,
        }
    }
}

/// Least-squares coefficients of `ζ(s) = a·s⁴ + b·s² + c` (SI units).
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Covariance of `(a, b, c)`; rows/columns of a fixed `a` are zero.
    pub covariance: [[f64; 3]; 3],
    /// RMS residual of the fit (rad).
    pub residual_rms: f64,
}

/// Result of a Thon-ring fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfFit {
    /// a (rad·m⁴) = π C_s λ³ / 2.
    pub quartic_coeff: f64,
    /// b (rad·m²) = −π ΔZ λ.
    pub quadratic_coeff: f64,
    /// c (rad): minus the laser phase at the unscattered beam, plus any
    /// amplitude-contrast phase; reported in (−7π/8, π/8].
    pub constant_phase: f64,
    pub ellipse: Ellipse,
    /// CTF zeros used in the fit (1/m), strictly increasing.
    pub zero_locations: Vec<f64>,
    /// Phase nπ assigned to each zero (rad).
    pub assigned_phases: Vec<f64>,
    pub covariance: [[f64; 3]; 3],
    pub residual_rms: f64,
    /// ΔZ (m) implied by b.
    pub defocus: f64,
    /// C_s (m) implied by a.
    pub spherical_aberration: f64,
}

/// Separable Gaussian blur with clamped edges.
pub fn gaussian_smooth(image: &RasterImage<f64>, sigma: f64) -> RasterImage<f64> {
    if sigma <= 0.0 {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let data = image.data();
    let (h, w) = data.dim();
    let r = (kernel.len() / 2) as isize;
    let mut tmp = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            tmp[[i, j]] = kernel
                .iter()
                .enumerate()
                .map(|(k, g)| g * data[[i, (j as isize + k as isize - r).clamp(0, w as isize - 1) as usize]])
                .sum();
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            out[[i, j]] = kernel
                .iter()
                .enumerate()
                .map(|(k, g)| g * tmp[[(i as isize + k as isize - r).clamp(0, h as isize - 1) as usize, j]])
                .sum();
        }
    }
    RasterImage::new(out, image.pixel_size(), image.plane(), image.kind()).expect("same geometry")
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn smooth_1d(values: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            kernel.iter().enumerate().map(|(k, g)| g * values[(i + k as isize - r).clamp(0, n - 1) as usize]).sum()
        })
        .collect()
}

/// Sub-bin positions (in bins) of prominent local minima of `values` in `[lo, hi)`.
fn prominent_minima(values: &[f64], lo: usize, hi: usize, min_prominence: f64) -> Vec<f64> {
    let hi = hi.min(values.len().saturating_sub(1));
    let candidates: Vec<usize> =
        (lo.max(1)..hi).filter(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1]).collect();
    let mut found = Vec::new();
    for (idx, &i) in candidates.iter().enumerate() {
        let left_end = if idx > 0 { candidates[idx - 1] } else { lo.saturating_sub(1) };
        let right_end = candidates.get(idx + 1).copied().unwrap_or(hi);
        let left = values[left_end..=i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let right = values[i..=right_end].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let flank = left.min(right);
        if flank <= 0.0 || (flank - values[i]) / flank < min_prominence {
            continue;
        }
        found.push(i as f64 + parabola_vertex(values[i - 1], values[i], values[i + 1]));
    }
    found
}

/// Offset of the vertex of the parabola through (−1, a), (0, b), (1, c).
fn parabola_vertex(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

/// Positions (1/m) of the minima of an angularly averaged power spectrum or CTF
/// profile, refined by a parabola through the three smoothed samples around each.
pub fn locate_ctf_zeros(profile: &RadialProfile<f64>, search: &ZeroSearch) -> Result<Vec<f64>> {
    let step = profile.step();
    if !(step > 0.0) {
        return Err(LppError::validation("profile needs at least two uniformly spaced samples"));
    }
    let s0 = profile.s[0];
    let smoothed = smooth_1d(&profile.values, search.sigma_bins);
    let lo = ((search.s_min - s0) / step).ceil().max(0.0) as usize;
    let hi = match search.s_max {
        Some(s) => ((s - s0) / step).floor().max(0.0) as usize,
        None => profile.len(),
    };
    let zeros: Vec<f64> =
        prominent_minima(&smoothed, lo, hi, search.min_prominence).into_iter().map(|b| s0 + b * step).collect();
    if zeros.len() < 2 {
        return Err(LppError::estimation(format!(
            "found {} CTF minima above {:.3} 1/nm, need at least 2",
            zeros.len(),
            search.s_min * 1e-9
        )));
    }
    Ok(zeros)
}

/// Least-squares fit of `ζ(s) = a·s⁴ + b·s² + c` through `(s, phase)` pairs.
///
/// With `fixed_quartic` the quartic coefficient is held and only `b, c` are fit.
/// The design matrix is built in nm⁻¹ so its columns are of comparable size.
pub fn fit_defocus_polynomial(zeros: &[(f64, f64)], fixed_quartic: Option<f64>) -> Result<PolynomialFit> {
    let needed = if fixed_quartic.is_some() { 2 } else { 3 };
    if zeros.len() < needed {
        return Err(LppError::validation(format!(
            "need at least {needed} zeros for the phase fit, got {}",
            zeros.len()
        )));
    }
    if zeros.iter().any(|(s, p)| !s.is_finite() || !p.is_finite()) {
        return Err(LppError::validation("zero positions and phases must be finite"));
    }
    const NM: f64 = 1e-9;
    let cols = if fixed_quartic.is_some() { 2 } else { 3 };
    let rows = zeros.len();
    let mut design = nalgebra::DMatrix::<f64>::zeros(rows, cols);
    let mut target = nalgebra::DVector::<f64>::zeros(rows);
    for (r, &(s, phase)) in zeros.iter().enumerate() {
        let u = s * NM;
        let u2 = u * u;
        match fixed_quartic {
            Some(a) => {
                design[(r, 0)] = u2;
                design[(r, 1)] = 1.0;
                target[r] = phase - a * s.powi(4);
            }
            None => {
                design[(r, 0)] = u2 * u2;
                design[(r, 1)] = u2;
                design[(r, 2)] = 1.0;
                target[r] = phase;
            }
        }
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(LppError::Fit {
            message: "phase fit is rank deficient".into(),
            diagnostics: format!(
                "singular values {:.3e}..{:.3e}; fix the quartic coefficient to a known C_s",
                smin, smax
            ),
        });
    }
    let coeffs = svd
        .solve(&target, 0.0)
        .map_err(|e| LppError::Fit { message: "least-squares solve failed".into(), diagnostics: e.to_string() })?;
    let residual = &target - &design * &coeffs;
    let rss = residual.norm_squared();
    let dof = rows.saturating_sub(cols).max(1) as f64;
    let sigma2 = rss / dof;
    let v_t = svd.v_t.as_ref().expect("requested V");
    let inv_s2 = nalgebra::DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let cov_scaled = v_t.transpose() * inv_s2 * v_t * sigma2;

    // Undo the nm scaling: a_SI = a_nm·nm⁴, b_SI = b_nm·nm².
    let nm4 = NM.powi(4);
    let nm2 = NM * NM;
    let mut covariance = [[0.0; 3]; 3];
    let (a, b, c, slots): (f64, f64, f64, Vec<(usize, f64)>) = match fixed_quartic {
        Some(a) => (a, coeffs[0] * nm2, coeffs[1], vec![(1, nm2), (2, 1.0)]),
        None => (coeffs[0] * nm4, coeffs[1] * nm2, coeffs[2], vec![(0, nm4), (1, nm2), (2, 1.0)]),
    };
    for (i, &(si, fi)) in slots.iter().enumerate() {
        for (j, &(sj, fj)) in slots.iter().enumerate() {
            covariance[si][sj] = cov_scaled[(i, j)] * fi * fj;
        }
    }
    Ok(PolynomialFit { a, b, c, covariance, residual_rms: (rss / rows as f64).sqrt() })
}

/// Sum and count per (sector, radial bin) of a DC-centered raster.
fn sector_profiles(map: &RasterImage<f64>, sectors: usize) -> (Vec<Vec<f64>>, usize) {
    let (h, w) = map.data().dim();
    let (cy, cx) = (h / 2, w / 2);
    let bins = cy.min(cx);
    let mut sums = vec![vec![0.0; bins]; sectors];
    let mut counts = vec![vec![0usize; bins]; sectors];
    for ((i, j), &v) in map.data().indexed_iter() {
        let dy = i as f64 - cy as f64;
        let dx = j as f64 - cx as f64;
        let b = (dx * dx + dy * dy).sqrt().round() as usize;
        if b == 0 || b >= bins {
            continue;
        }
        // Sectors cover [0, π); opposite directions are equivalent in a power spectrum.
        let theta = dy.atan2(dx).rem_euclid(PI);
        let k = ((theta / PI * sectors as f64) as usize).min(sectors - 1);
        sums[k][b] += v;
        counts[k][b] += 1;
    }
    let profiles = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| {
            let mut out: Vec<f64> =
                s.iter().zip(&c).map(|(&v, &n)| if n > 0 { v / n as f64 } else { f64::NAN }).collect();
            // Fill empty bins near the center from their neighbours.
            for b in 1..out.len() {
                if out[b].is_nan() {
                    out[b] = out[b - 1];
                }
            }
            out
        })
        .collect();
    (profiles, bins)
}

/// Estimates two-fold astigmatism from the Thon rings of a DC-centered power
/// spectrum and resamples the spectrum so the rings become circles.
///
/// The resampling scales each azimuth radially by `g(θ)/ḡ`, where `g` is the
/// fitted ellipse radius and `ḡ` its mean over azimuth, so the mean radius of
/// every ring is unchanged.
pub fn correct_astigmatism(power_spectrum: &RasterImage<f64>) -> Result<(RasterImage<f64>, Ellipse)> {
    let options = ThonOptions::new(DefocusSign::Overfocus);
    correct_astigmatism_with(power_spectrum, &options)
}

/// [`correct_astigmatism`] with explicit wedge, sector count and minima search.
pub fn correct_astigmatism_with(
    power_spectrum: &RasterImage<f64>,
    options: &ThonOptions,
) -> Result<(RasterImage<f64>, Ellipse)> {
    let ellipse = fit_ring_ellipse(power_spectrum, options)?;
    Ok((circularize(power_spectrum, &ellipse), ellipse))
}

/// Fits the ring ellipse: ring radii from the angular mean, per-sector minima
/// near each ring, an algebraic fit per ring, then a joint geometric refinement.
pub fn fit_ring_ellipse(power_spectrum: &RasterImage<f64>, options: &ThonOptions) -> Result<Ellipse> {
    if options.sectors < 8 {
        return Err(LppError::validation("need at least 8 sectors to trace rings"));
    }
    let profile = angular_mean(power_spectrum, &options.wedge)?;
    let rings = locate_ctf_zeros(&profile, &options.zeros)
        .map_err(|e| LppError::estimation(format!("Thon rings not detectable: {e}")))?;
    let step = power_spectrum.pixel_size();
    let ring_bins: Vec<f64> = rings.iter().map(|s| s / step).collect();
    let (profiles, _) = sector_profiles(power_spectrum, options.sectors);

    let sector_width = PI / options.sectors as f64;
    let mut points: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ring_bins.len()];
    for (k, prof) in profiles.iter().enumerate() {
        let theta = (k as f64 + 0.5) * sector_width;
        let (tx, ty) = (theta.cos(), theta.sin());
        let inside_wedge = options.wedge.excludes(tx, ty)
            || options.wedge.excludes((theta - sector_width / 2.0).cos(), (theta - sector_width / 2.0).sin())
            || options.wedge.excludes((theta + sector_width / 2.0).cos(), (theta + sector_width / 2.0).sin());
        if inside_wedge {
            continue;
        }
        let smoothed = smooth_1d(prof, options.zeros.sigma_bins.max(1.0));
        for (r, &center) in ring_bins.iter().enumerate() {
            let prev = if r > 0 { ring_bins[r - 1] } else { 0.0 };
            let next = ring_bins.get(r + 1).copied().unwrap_or(smoothed.len() as f64);
            let half = 0.4 * (center - prev).min(next - center);
            let lo = (center - half).floor().max(1.0) as usize;
            let hi = ((center + half).ceil() as usize).min(smoothed.len() - 2);
            if hi <= lo + 2 {
                continue;
            }
            let (mut best, mut best_v) = (lo, f64::INFINITY);
            for (b, &v) in smoothed.iter().enumerate().take(hi + 1).skip(lo) {
                if v < best_v {
                    best = b;
                    best_v = v;
                }
            }
            if best == lo || best == hi {
                continue;
            }
            let radius = best as f64 + parabola_vertex(smoothed[best - 1], smoothed[best], smoothed[best + 1]);
            points[r].push((radius, theta));
        }
    }
    let rings_used: Vec<Vec<(f64, f64)>> = points.into_iter().filter(|p| p.len() >= 6).collect();
    if rings_used.len() < 2 {
        return Err(LppError::estimation("fewer than two Thon rings could be traced around the spectrum"));
    }

    // Algebraic fit per ring: 1/r² = u + P cos 2θ + Q sin 2θ.
    let mut p_sum = 0.0;
    let mut q_sum = 0.0;
    for ring in &rings_used {
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for &(r, t) in ring {
            let row = nalgebra::Vector3::new(1.0, (2.0 * t).cos(), (2.0 * t).sin());
            ata += row * row.transpose();
            atb += row / (r * r);
        }
        let x = ata.try_inverse().ok_or_else(|| LppError::estimation("degenerate ring trace"))? * atb;
        p_sum += x[1] / x[0];
        q_sum += x[2] / x[0];
    }
    let n = rings_used.len() as f64;
    let start = [p_sum / n, q_sum / n];

    // Geometric refinement of the shared shape; ring scales solved in closed form.
    let cost = |pq: &[f64]| -> f64 {
        if pq[0].hypot(pq[1]) >= 0.9 {
            return f64::INFINITY;
        }
        rings_used
            .iter()
            .map(|ring| {
                let g: Vec<f64> = ring
                    .iter()
                    .map(|&(_, t)| 1.0 / (1.0 + pq[0] * (2.0 * t).cos() + pq[1] * (2.0 * t).sin()).sqrt())
                    .collect();
                let scale =
                    ring.iter().zip(&g).map(|(&(r, _), gi)| r * gi).sum::<f64>() / g.iter().map(|v| v * v).sum::<f64>();
                ring.iter().zip(&g).map(|(&(r, _), gi)| ((r - scale * gi) / scale).powi(2)).sum::<f64>()
            })
            .sum()
    };
    let refined = nelder_mead(cost, &start, &[0.01, 0.01], 1e-12, 2000);
    Ellipse::from_harmonics(refined.x[0], refined.x[1])
}

/// Radially resamples `spectrum` so rings of shape `ellipse` become circles of
/// the same mean radius.
pub fn circularize(spectrum: &RasterImage<f64>, ellipse: &Ellipse) -> RasterImage<f64> {
    let samples = 3600;
    let mean_g =
        (0..samples).map(|k| ellipse.radial_factor(PI * k as f64 / samples as f64)).sum::<f64>() / samples as f64;
    let data = spectrum.data();
    let (h, w) = data.dim();
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let out = Array2::from_shape_fn((h, w), |(i, j)| {
        let dy = i as f64 - cy;
        let dx = j as f64 - cx;
        if dx == 0.0 && dy == 0.0 {
            return data[[i, j]];
        }
        let factor = ellipse.radial_factor(dy.atan2(dx)) / mean_g;
        bilinear(data, cy + dy * factor, cx + dx * factor)
    });
    RasterImage::new(out, spectrum.pixel_size(), spectrum.plane(), spectrum.kind()).expect("same geometry")
}

fn bilinear(data: &Array2<f64>, y: f64, x: f64) -> f64 {
    let (h, w) = data.dim();
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (i0, j0) = (y.floor() as usize, x.floor() as usize);
    let (i1, j1) = ((i0 + 1).min(h - 1), (j0 + 1).min(w - 1));
    let (fy, fx) = (y - i0 as f64, x - j0 as f64);
    let top = data[[i0, j0]] * (1.0 - fx) + data[[i0, j1]] * fx;
    let bottom = data[[i1, j0]] * (1.0 - fx) + data[[i1, j1]] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Wraps `c` into (−7π/8, π/8]; returns the wrapped value and the multiple of π removed.
fn wrap_constant_phase(c: f64) -> (f64, f64) {
    let m = ((c - PI / 8.0) / PI).ceil();
    (c - m * PI, m)
}

/// Full Thon-ring fit of a micrograph: power spectrum, smoothing, astigmatism
/// correction, angular averaging outside the laser wedge, zero location,
/// consecutive nπ assignment and the polynomial phase fit.
pub fn fit_ctf(image: &RasterImage<f64>, beam: &ElectronBeam<f64>, options: &ThonOptions) -> Result<CtfFit> {
    let spectrum = gaussian_smooth(&power_spectrum(image)?, options.spectrum_sigma);
    let (corrected, ellipse) = if options.assume_isotropic {
        (spectrum, Ellipse::circle())
    } else {
        correct_astigmatism_with(&spectrum, options)?
    };
    let profile = angular_mean(&corrected, &options.wedge)?;
    let zeros = locate_ctf_zeros(&profile, &options.zeros)?;
    fit_ctf_zeros(&zeros, beam, options, ellipse)
}

/// Assigns consecutive multiples of π to `zeros` and fits the phase polynomial.
pub fn fit_ctf_zeros(
    zeros: &[f64],
    beam: &ElectronBeam<f64>,
    options: &ThonOptions,
    ellipse: Ellipse,
) -> Result<CtfFit> {
    if zeros.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LppError::validation("zero locations must be strictly increasing"));
    }
    let direction = match options.defocus_sign {
        DefocusSign::Overfocus => 1.0,
        DefocusSign::Underfocus => -1.0,
    };
    let lambda = beam.wavelength();
    let fixed_a = options.fixed_spherical_aberration.map(|cs| PI * cs * lambda.powi(3) / 2.0);
    let pairs: Vec<(f64, f64)> =
        zeros.iter().enumerate().map(|(i, &s)| (s, direction * (i as f64 + 1.0) * PI)).collect();
    let fit = fit_defocus_polynomial(&pairs, fixed_a)?;
    let (c, m) = wrap_constant_phase(fit.c);
    Ok(CtfFit {
        quartic_coeff: fit.a,
        quadratic_coeff: fit.b,
        constant_phase: c,
        ellipse,
        zero_locations: zeros.to_vec(),
        assigned_phases: pairs.iter().map(|(_, p)| p - m * PI).collect(),
        covariance: fit.covariance,
        residual_rms: fit.residual_rms,
        defocus: -fit.b / (PI * lambda),
        spherical_aberration: 2.0 * fit.a / (PI * lambda.powi(3)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomial_is_recovered() {
        let (a, b, c) = (3.1e-37, -6.5e-18, -0.31);
        let pts: Vec<(f64, f64)> =
            [0.4e9, 0.7e9, 0.9e9, 1.2e9, 1.4e9].iter().map(|&s: &f64| (s, a * s.powi(4) + b * s * s + c)).collect();
        let fit = fit_defocus_polynomial(&pts, None).unwrap();
        assert!(((fit.a - a) / a).abs() < 1e-8);
        assert!(((fit.b - b) / b).abs() < 1e-8);
        assert!(((fit.c - c) / c).abs() < 1e-8);
        let fixed = fit_defocus_polynomial(&pts[..2], Some(a)).unwrap();
        assert!(((fixed.b - b) / b).abs() < 1e-8);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let pts = [(1e9, 1.0), (1e9, 1.0), (1e9, 1.0)];
        assert!(matches!(fit_defocus_polynomial(&pts, None), Err(LppError::Fit { .. })));
        assert!(fit_defocus_polynomial(&pts[..2], None).unwrap_err().is_validation());
    }

    #[test]
    fn monotone_profile_has_no_zeros() {
        let s: Vec<f64> = (0..200).map(|i| i as f64 * 1e7).collect();
        let v: Vec<f64> = (0..200).map(|i| 100.0 - i as f64).collect();
        let p = RadialProfile::new(s, v).unwrap();
        assert!(matches!(locate_ctf_zeros(&p, &ZeroSearch::default()), Err(LppError::Estimation(_))));
    }

    #[test]
    fn wrap_window() {
        for c in [-3.0, -1.0, 0.0, 0.3, 0.5, 2.0, 7.0] {
            let (w, m) = wrap_constant_phase(c);
            assert!(w > -7.0 * PI / 8.0 && w <= PI / 8.0 + 1e-15, "{c} -> {w}");
            assert!((c - w - m * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_orientation_and_ratio() {
        // 1/r² ∝ 1 + p cos 2θ: smallest radius along θ = 0, major axis at π/2.
        let e = Ellipse::from_harmonics(0.1, 0.0).unwrap();
        assert!((e.orientation - FRAC_PI_2).abs() < 1e-12);
        assert!((e.ratio - (1.1f64 / 0.9).sqrt()).abs() < 1e-12);
        assert!((e.radial_factor(FRAC_PI_2) / e.radial_factor(0.0) - e.ratio).abs() < 1e-12);
    }
}
