//! Peak-to-peak phase and period of a laser-position scan.

use super::periodogram::dominant_frequency_1d;
use super::thon::CtfFit;
use crate::error::{LppError, Result};

/// Minimum number of scan positions.
pub const MIN_SCAN_POSITIONS: usize = 8;
/// Fraction by which an estimated period may exceed the scanned span before the
/// scan is rejected as too short; absorbs noise in the estimate of a scan that
/// covers exactly one period.
pub const PERIOD_SPAN_ALLOWANCE: f64 = 0.1;

/// Fitted constant phase against beam position along the laser axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScanResult {
    /// Beam offsets along the laser axis (m), ascending.
    pub positions: Vec<f64>,
    /// Constant CTF phase at each position (rad).
    pub phases: Vec<f64>,
    /// 2^{3/2} times the population standard deviation of the phases (rad).
    pub peak_to_peak: f64,
    /// Period of the phase modulation (m).
    pub period: f64,
}

/// Analyzes the constant phase `c` of a series of CTF fits.
pub fn analyze_phase_scan(scan: &[(f64, CtfFit)]) -> Result<PhaseScanResult> {
    let positions: Vec<f64> = scan.iter().map(|(x, _)| *x).collect();
    let phases: Vec<f64> = scan.iter().map(|(_, fit)| fit.constant_phase).collect();
    analyze_phase_series(&positions, &phases)
}

/// Peak-to-peak amplitude and period of phases sampled at uniformly spaced
/// positions.
///
/// The peak-to-peak value is the RMS-to-peak-to-peak conversion of a sinusoid,
/// exact when the scan covers whole periods. The scan must cover at least one
/// period: `count × spacing ≥ period`, up to [`PERIOD_SPAN_ALLOWANCE`].
pub fn analyze_phase_series(positions: &[f64], phases: &[f64]) -> Result<PhaseScanResult> {
    if positions.len() != phases.len() {
        return Err(LppError::validation("positions and phases differ in length"));
    }
    if positions.len() < MIN_SCAN_POSITIONS {
        return Err(LppError::validation(format!(
            "need at least {MIN_SCAN_POSITIONS} scan positions, got {}",
            positions.len()
        )));
    }
    if positions.iter().chain(phases).any(|v| !v.is_finite()) {
        return Err(LppError::validation("scan values must be finite"));
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let x: Vec<f64> = order.iter().map(|&i| positions[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| phases[i]).collect();
    let n = x.len() as f64;
    let extent = x[x.len() - 1] - x[0];
    if !(extent > 0.0) {
        return Err(LppError::validation("scan positions must not all coincide"));
    }
    let span = extent * n / (n - 1.0);

    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let peak_to_peak = std * 2f64.powf(1.5);

    let frequency = dominant_frequency_1d(&x, &y, span)?;
    let period = 1.0 / frequency;
    if period > span * (1.0 + PERIOD_SPAN_ALLOWANCE) {
        return Err(LppError::estimation(format!(
            "scan covers {span:e} m, less than the estimated period {period:e} m"
        )));
    }
    Ok(PhaseScanResult { positions: x, phases: y, peak_to_peak, period })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_positions() {
        let x: Vec<f64> = (0..7).map(|i| i as f64).collect();
        assert!(analyze_phase_series(&x, &x).unwrap_err().is_validation());
    }

    #[test]
    fn short_span_is_rejected() {
        // Half a period of a sinusoid.
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).collect();
        assert!(matches!(analyze_phase_series(&x, &y), Err(LppError::Estimation(_))));
    }
}
