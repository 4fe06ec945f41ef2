//! Central-difference utilities for validating analytic gradients.
//!
//! These helpers only ever call the objective as a black box, so they stay
//! independent of whatever backpropagation path produced the gradient under
//! test.

/// Central difference (f(x+h) - f(x-h)) / 2h.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central difference along coordinate `i` of a multivariate function.
pub fn central_diff_coord<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Relative error with a floor on the denominator, so near-zero reference
/// values do not blow the ratio up.
pub fn rel_err(value: f64, reference: f64, floor: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(floor)
}

/// Checks `grad[i]` against central differences on the listed coordinates.
/// Returns the worst (relative error, coordinate) pair.
pub fn max_grad_rel_err<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    grad: &[f64],
    coords: &[usize],
    h: f64,
    floor: f64,
) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for &i in coords {
        let fd = central_diff_coord(&mut f, x, i, h);
        let e = rel_err(grad[i], fd, floor);
        if e > worst.0 {
            worst = (e, i);
        }
    }
    worst
}
