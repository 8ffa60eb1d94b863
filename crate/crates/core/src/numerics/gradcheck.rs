//! Central-difference gradient checking.

/// Largest relative error between an analytic gradient and the central
/// difference `(f(x + h e_i) - f(x - h e_i)) / 2h`, where the relative error
/// of one coordinate is `|a - n| / max(1e-12, |a| + |n|)`.
pub fn grad_check<F>(f: F, analytic: &[f64], x: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    grad_check_with_floor(f, analytic, x, h, 1e-12)
}

/// [`grad_check`] with a configurable denominator floor
/// `|a - n| / max(floor, |a| + |n|)`. A floor above the finite-difference
/// noise level (roughly `1e-16 * |f| / h`) keeps coordinates whose true
/// gradient is near zero from reporting pure rounding noise as error.
pub fn grad_check_with_floor<F>(mut f: F, analytic: &[f64], x: &[f64], h: f64, floor: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), x.len(), "gradient/point length mismatch");
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(floor));
    }
    worst
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-12)
}
