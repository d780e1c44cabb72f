use lpp_core::detector::{
    apply_coincidence_loss, apply_coincidence_loss_image, invert_coincidence_loss, invert_coincidence_loss_image,
    sample_poisson_counts, CoincidenceParams,
};
use lpp_core::{LppError, Plane, RasterImage, ValueKind};
use proptest::prelude::*;

#[test]
fn unit_product_loses_one_over_e() {
    let p = CoincidenceParams::new(0.25).unwrap();
    let detected = apply_coincidence_loss(4.0, &p).unwrap();
    assert!((detected / 4.0 - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert!((detected / 4.0 - 0.632).abs() < 1e-3);
}

#[test]
fn tiny_theta_is_nearly_lossless() {
    let p = CoincidenceParams::new(1e-6).unwrap();
    // Relative loss is IΘ/2 to leading order.
    for i in [0.5, 3.0, 20.0] {
        let d: f64 = apply_coincidence_loss(i, &p).unwrap();
        assert!(((i - d) / i - i * 0.5e-6).abs() < (i * 1e-6f64).powi(2));
    }
    let d: f64 = apply_coincidence_loss(0.01, &p).unwrap();
    assert!(((d - 0.01) / 0.01).abs() < 1e-8);
}

#[test]
fn saturated_pixel_reports_product() {
    let p = CoincidenceParams::new(0.02).unwrap();
    match invert_coincidence_loss(50.0, &p) {
        Err(LppError::Saturation { product }) => assert!((product - 1.0).abs() < 1e-12),
        other => panic!("expected saturation, got {other:?}"),
    }
}

#[test]
fn image_round_trip() {
    let p = CoincidenceParams::new(0.01).unwrap();
    let data = ndarray::Array2::from_shape_fn((16, 24), |(i, j)| (i * 24 + j) as f64 * 0.25);
    let img = RasterImage::new(data, 5e-6, Plane::Image, ValueKind::Intensity).unwrap();
    let back = invert_coincidence_loss_image(&apply_coincidence_loss_image(&img, &p).unwrap(), &p).unwrap();
    for (a, b) in img.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }
}

#[test]
fn poisson_mean_and_variance() {
    let expected = RasterImage::<f64>::filled(1000, 1000, 100.0, 1.0, Plane::Image, ValueKind::Intensity).unwrap();
    let counts = sample_poisson_counts(&expected, 2024).unwrap();
    let n = 1e6;
    let mean = counts.data().sum() / n;
    let var = counts.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 100.0).abs() < 0.5, "{mean}");
    assert!((var / 100.0 - 1.0).abs() < 0.01, "{var}");
    assert!(counts.data().iter().all(|v: &f64| v.fract() == 0.0 && *v >= 0.0));
}

#[test]
fn poisson_draws_do_not_depend_on_thread_count() {
    let expected = RasterImage::new(
        ndarray::Array2::from_shape_fn((64, 48), |(i, j)| 0.5 + (i + 2 * j) as f64),
        1.0,
        Plane::Image,
        ValueKind::Intensity,
    )
    .unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_poisson_counts(&expected, 77).unwrap())
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #[test]
    fn round_trip_is_identity(product in 0.0f64..0.99, theta in 1e-4f64..1.0) {
        let p = CoincidenceParams::new(theta).unwrap();
        let detected = product / theta;
        let incident = invert_coincidence_loss(detected, &p).unwrap();
        let again = apply_coincidence_loss(incident, &p).unwrap();
        prop_assert!((again - detected).abs() <= 1e-10 * detected.max(f64::MIN_POSITIVE));

        let actual = product / theta;
        let there = apply_coincidence_loss(actual, &p).unwrap();
        let back = invert_coincidence_loss(there, &p).unwrap();
        prop_assert!((back - actual).abs() <= 1e-10 * actual.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn loss_is_monotone_and_bounded(a in 0.0f64..1e3, b in 0.0f64..1e3, theta in 0.0f64..2.0) {
        let p = CoincidenceParams::new(theta).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let dlo = apply_coincidence_loss(lo, &p).unwrap();
        let dhi = apply_coincidence_loss(hi, &p).unwrap();
        prop_assert!(dlo <= dhi);
        prop_assert!(dhi <= hi);
        if theta > 0.0 {
            prop_assert!(dhi <= 1.0 / theta);
        }
    }
}
