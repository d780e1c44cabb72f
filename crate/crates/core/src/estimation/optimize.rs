//! Derivative-free minimizers used by the fits.

/// Result of a one-dimensional or multi-dimensional minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// `start` (if inside the bracket) is evaluated too and wins ties, so the
/// returned value never exceeds `f(start)`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, start: Option<f64>, tol: f64) -> Minimum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut best = (f64::NAN, f64::INFINITY);
    let mut evaluations = 0;
    let mut eval = |x: f64, best: &mut (f64, f64)| {
        let v = f(x);
        evaluations += 1;
        if v < best.1 {
            *best = (x, v);
        }
        v
    };
    if let Some(s) = start {
        eval(s, &mut best);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut best);
    let mut fd = eval(d, &mut best);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut best);
        }
    }
    Minimum { x: vec![best.0], value: best.1, evaluations, converged: true }
}

/// Nelder–Mead simplex minimization.
///
/// Stops when the spread of objective values across the simplex falls below
/// `rel_tol·|f_best|` (plus a tiny absolute floor) or after `max_evals`
/// evaluations. Return `f64::INFINITY` from `f` to encode bound constraints.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    rel_tol: f64,
    max_evals: usize,
) -> Minimum {
    let n = x0.len();
    assert_eq!(n, steps.len(), "one step per coordinate");
    let evaluations = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let mut v = eval(&x);
        if !v.is_finite() {
            x[i] = x0[i] - steps[i];
            v = eval(&x);
        }
        simplex.push((x, v));
    }

    let mut converged = false;
    while evaluations.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && worst - best <= rel_tol * best.abs() + 1e-300 {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let along =
            |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j])).collect() };

        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < best {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < worst.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = (0..n).map(|j| anchor[j] + 0.5 * (p.0[j] - anchor[j])).collect();
            let v = eval(&x);
            *p = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evaluations: evaluations.get(), converged }
}
