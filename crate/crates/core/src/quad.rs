//! Quadrature on finite intervals and on the half line, on top of the
//! double-exponential rule of the `quadrature` crate.

/// ∫_a^b f to roughly `rel_tol` relative accuracy.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rough = quadrature::integrate(&f, a, b, 1e-6).integral;
    let target = (rel_tol * rough.abs()).max(1e-300);
    quadrature::integrate(&f, a, b, target).integral
}

/// ∫_0^∞ f, split at the given interior breakpoints (in any order). The
/// last piece [b, ∞) is mapped onto (0, 1] by y = b/s.
pub fn half_line(f: impl Fn(f64) -> f64, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > 0.0)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if pts.is_empty() {
        pts.push(1.0);
    }
    let mut total = 0.0;
    let mut lo = 0.0;
    for &b in &pts {
        total += integrate(&f, lo, b, rel_tol);
        lo = b;
    }
    let last = lo;
    total += integrate(
        |s: f64| {
            if s <= 0.0 {
                0.0
            } else {
                let y = last / s;
                let v = f(y) * last / (s * s);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
        },
        0.0,
        1.0,
        rel_tol,
    );
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-10);
        let v = half_line(|x| (-x).exp(), &[1.0], 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
        let v = half_line(|x| 1.0 / (1.0 + x).powi(3), &[0.5, 4.0], 1e-12);
        assert!((v - 0.5).abs() < 1e-10);
    }
}
