//! Counting-detector coincidence loss and shot noise.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{LppError, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

/// Coincidence-loss strength Θ = (τ/T)(A/a): dead time over frame time times
/// pixel area over the area of one counting event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceParams<T> {
    theta: T,
}

impl<T: Real> CoincidenceParams<T> {
    pub fn new(theta: T) -> Result<Self> {
        if !(theta >= T::zero()) || !theta.is_finite() {
            return Err(LppError::validation(format!("coincidence parameter must be non-negative, got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> T {
        self.theta
    }
}

/// Detected counts `(1 − exp(−IΘ))/Θ` for `I` incident electrons per pixel.
pub fn apply_coincidence_loss<T: Real>(actual_counts: T, params: &CoincidenceParams<T>) -> Result<T> {
    if !(actual_counts >= T::zero()) || !actual_counts.is_finite() {
        return Err(LppError::validation(format!("counts must be non-negative, got {actual_counts}")));
    }
    let theta = params.theta;
    if theta == T::zero() {
        return Ok(actual_counts);
    }
    Ok(-(-actual_counts * theta).exp_m1() / theta)
}

/// Incident counts `−ln(1 − DΘ)/Θ` that produce `D` detected counts.
pub fn invert_coincidence_loss<T: Real>(detected_counts: T, params: &CoincidenceParams<T>) -> Result<T> {
    if !(detected_counts >= T::zero()) || !detected_counts.is_finite() {
        return Err(LppError::validation(format!("counts must be non-negative, got {detected_counts}")));
    }
    let theta = params.theta;
    if theta == T::zero() {
        return Ok(detected_counts);
    }
    let product = detected_counts * theta;
    if product >= T::one() {
        return Err(LppError::Saturation { product: product.as_f64() });
    }
    Ok(-(-product).ln_1p() / theta)
}

/// [`apply_coincidence_loss`] on every pixel.
pub fn apply_coincidence_loss_image<T: Real>(
    image: &RasterImage<T>,
    params: &CoincidenceParams<T>,
) -> Result<RasterImage<T>> {
    map_checked(image, |v| apply_coincidence_loss(v, params))
}

/// [`invert_coincidence_loss`] on every pixel.
pub fn invert_coincidence_loss_image<T: Real>(
    image: &RasterImage<T>,
    params: &CoincidenceParams<T>,
) -> Result<RasterImage<T>> {
    map_checked(image, |v| invert_coincidence_loss(v, params))
}

fn map_checked<T: Real>(image: &RasterImage<T>, f: impl Fn(T) -> Result<T>) -> Result<RasterImage<T>> {
    let mut out = image.clone();
    for v in out.data_mut().iter_mut() {
        *v = f(*v)?;
    }
    Ok(out)
}

/// Independent Poisson draws with the given per-pixel expectations.
///
/// Pixel `n` (row-major) draws from its own ChaCha8 stream `n` under `seed`, so
/// the output depends only on the seed and the expectations, never on thread
/// scheduling.
pub fn sample_poisson_counts<T: Real>(expected: &RasterImage<T>, seed: u64) -> Result<RasterImage<T>> {
    if let Some(bad) = expected.data().iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
        return Err(LppError::validation(format!("expected counts must be non-negative and finite, got {bad}")));
    }
    let width = expected.width();
    let mut counts = Array2::<T>::zeros(expected.data().dim());
    counts.axis_iter_mut(Axis(0)).into_par_iter().zip(expected.data().axis_iter(Axis(0))).enumerate().for_each_init(
        || ChaCha8Rng::seed_from_u64(seed),
        |rng, (row, (mut out, mean))| {
            for (col, (o, &m)) in out.iter_mut().zip(mean.iter()).enumerate() {
                rng.set_stream((row * width + col) as u64);
                rng.set_word_pos(0);
                let lambda = m.as_f64();
                *o = if lambda > 0.0 {
                    let dist = Poisson::new(lambda).expect("positive finite rate");
                    T::lit(dist.sample(rng))
                } else {
                    T::zero()
                };
            }
        },
    );
    RasterImage::new(counts, expected.pixel_size(), expected.plane(), expected.kind())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Plane, ValueKind};

    #[test]
    fn known_values() {
        let p = CoincidenceParams::new(0.5).unwrap();
        let d = apply_coincidence_loss(2.0, &p).unwrap();
        assert!((d - (1.0 - (-1.0f64).exp()) * 2.0).abs() < 1e-15);
        assert_eq!(apply_coincidence_loss(0.0, &p).unwrap(), 0.0);
        let zero = CoincidenceParams::new(0.0).unwrap();
        assert_eq!(apply_coincidence_loss(7.5, &zero).unwrap(), 7.5);
        assert_eq!(invert_coincidence_loss(7.5, &zero).unwrap(), 7.5);
    }

    #[test]
    fn small_theta_limit() {
        let p = CoincidenceParams::new(1e-6).unwrap();
        let d: f64 = apply_coincidence_loss(3.0, &p).unwrap();
        assert!((d / 3.0 - 1.0).abs() < 1e-5);
        assert!((d - (3.0 - 4.5e-6)).abs() < 1e-10);
    }

    #[test]
    fn saturation_and_validation() {
        let p = CoincidenceParams::new(0.1).unwrap();
        assert!(matches!(invert_coincidence_loss(10.0, &p), Err(LppError::Saturation { .. })));
        assert!(apply_coincidence_loss(-1.0, &p).unwrap_err().is_validation());
        assert!(CoincidenceParams::new(-0.1).is_err());
    }

    #[test]
    fn poisson_zero_and_determinism() {
        let zeros = RasterImage::filled(8, 4, 0.0, 1.0, Plane::Image, ValueKind::Intensity).unwrap();
        assert!(sample_poisson_counts(&zeros, 3).unwrap().data().iter().all(|&v| v == 0.0));
        let mean = RasterImage::filled(40, 30, 12.0, 1.0, Plane::Image, ValueKind::Intensity).unwrap();
        let a = sample_poisson_counts(&mean, 11).unwrap();
        let b = sample_poisson_counts(&mean, 11).unwrap();
        let c = sample_poisson_counts(&mean, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let neg = RasterImage::filled(4, 4, -1.0, 1.0, Plane::Image, ValueKind::Intensity).unwrap();
        assert!(sample_poisson_counts(&neg, 0).is_err());
    }
}
