//! Sample statistics used by the ensemble experiments.

use crate::error::{Error, Result};

/// Two-sided Kolmogorov–Smirnov distance sup_x |F_n(x) − F(x)|.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Empirical CDF evaluated at `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// Quantile with linear interpolation between order statistics
/// (the default definition of R and NumPy).
pub fn quantile(samples: &[f64], level: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid("level", format!("need 0 <= level <= 1, got {level}")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let h = (xs.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo]))
}

pub fn median(samples: &[f64]) -> Result<f64> {
    quantile(samples, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_textbook_identities() {
        let n = 10;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-15);
        assert_eq!(ks_distance(&[0.5], |x| x).unwrap(), 0.5);
        assert!(ks_distance(&[], |x| x).is_err());
    }

    #[test]
    fn quantiles() {
        let xs = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&xs).unwrap(), 2.5);
        assert_eq!(quantile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&xs, 1.0).unwrap(), 4.0);
        let s = [1.0, 2.0, 2.0, 5.0];
        assert_eq!(ecdf(&s, 2.0), 0.75);
        assert_eq!(ecdf(&s, 0.0), 0.0);
        assert_eq!(ecdf(&s, 9.0), 1.0);
    }
}
