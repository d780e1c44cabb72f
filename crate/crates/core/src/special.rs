//! Bessel functions of the first kind for moderate arguments.

use crate::scalar::Real;

/// J_n(x) for integer order, from the ascending power series.
///
/// Accurate to a few ulps for |x| ≲ 10, which covers every use in this crate
/// (arguments are at most η₀/2 < π/2).
pub fn bessel_j<T: Real>(order: i32, x: T) -> T {
    let n = order.unsigned_abs() as i32;
    let xf = x.as_f64();
    let half = 0.5 * xf;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    let value = if order < 0 && n % 2 == 1 { -sum } else { sum };
    T::lit(value)
}

pub fn bessel_j0<T: Real>(x: T) -> T {
    bessel_j(0, x)
}

pub fn bessel_j1<T: Real>(x: T) -> T {
    bessel_j(1, x)
}
