//! Closed-form limit laws of the rescaled maximizers.
//!
//! With q = d/(α−d) and θ = 2^d B(α−d, d)/(q^d (d−1)!):
//!
//! - Φ_t(Z^{(1)})/a_t converges to Y with P(Y ≤ y) = exp(−θ y^{d−α});
//! - Z^{(1)}/r_t converges to X^{(1)} with density
//!   p(x) = α ∫_0^∞ exp(−θ y^{d−α}) (y + q|x|)^{−α−1} dy;
//! - (Z^{(1)}, Z^{(2)})/r_t converges to a pair with density
//!   p(x₁, x₂) = α ∫_0^∞ exp(−θ y^{d−α}) (y + q|x₁|)^{−α} (y + q|x₂|)^{−α−1} dy.
//!
//! All norms are ℓ1, so the densities are functions of |x| and the radial
//! law carries the ℓ1-sphere measure 2^d s^{d−1}/(d−1)!.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::constants;
use crate::quad::half_line;

/// Relative accuracy of the quadratures.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
    pub theta: f64,
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

impl LimitLaw {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        let (q, theta) = constants(d, alpha)?;
        Ok(LimitLaw { d, alpha, q, theta })
    }

    fn gap(&self) -> f64 {
        self.alpha - self.d as f64
    }

    /// exp(−θ y^{d−α}), the weight shared by all the integrands.
    fn weight(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            (-self.theta * y.powf(-self.gap())).exp()
        }
    }

    /// Location of the bulk of the weight's derivative, used as a breakpoint.
    fn y_scale(&self) -> f64 {
        self.theta.powf(1.0 / self.gap())
    }

    /// Breakpoints from a quarter of the weight's scale up to 4·`far`,
    /// spaced by a factor 8.
    fn breaks(&self, far: f64) -> Vec<f64> {
        let scale = self.y_scale();
        let mut v = vec![0.25 * scale];
        let mut b = scale;
        let end = 4.0 * far.max(scale);
        while b < end {
            v.push(b);
            b *= 8.0;
        }
        v.push(end);
        v
    }

    /// Surface measure of the ℓ1 sphere of radius s in R^d.
    pub fn sphere_measure(&self, s: f64) -> f64 {
        let fact: f64 = (1..self.d).map(|i| i as f64).product();
        2f64.powi(self.d as i32) * s.powi(self.d as i32 - 1) / fact
    }

    /// P(Y ≤ y) = exp(−θ y^{d−α}).
    pub fn y_cdf(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::invalid("y", format!("need y > 0, got {y}")));
        }
        Ok(self.weight(y))
    }

    /// Inverse of [`Self::y_cdf`] on (0, 1).
    pub fn y_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("need 0 < p < 1, got {p}")));
        }
        Ok((self.theta / -p.ln()).powf(1.0 / self.gap()))
    }

    /// Density of X^{(1)} at a point with ℓ1 norm `norm`.
    pub fn x1_density_norm(&self, norm: f64) -> f64 {
        let c = self.q * norm.abs();
        let a = self.alpha;
        a * half_line(
            |y| self.weight(y) * (y + c).powf(-a - 1.0),
            &self.breaks(c),
            QUAD_TOL,
        )
    }

    pub fn x1_density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.x1_density_norm(l1(x)))
    }

    /// Joint density of (X^{(1)}, X^{(2)}) at points with norms n1, n2.
    pub fn joint_density_norm(&self, n1: f64, n2: f64) -> f64 {
        let (c1, c2) = (self.q * n1.abs(), self.q * n2.abs());
        let a = self.alpha;
        a * half_line(
            |y| self.weight(y) * (y + c1).powf(-a) * (y + c2).powf(-a - 1.0),
            &self.breaks(c1.max(c2)),
            QUAD_TOL,
        )
    }

    pub fn joint_density(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_point(x1)?;
        self.check_point(x2)?;
        Ok(self.joint_density_norm(l1(x1), l1(x2)))
    }

    /// Density of the limit of (Z¹/r_t, Z²/r_t, Φ¹/a_t, Φ²/a_t):
    /// α² exp(−θ y₂^{d−α}) (y₁ + q|x₁|)^{−α−1} (y₂ + q|x₂|)^{−α−1} 1{y₁ ≥ y₂}.
    pub fn joint4_density(&self, x1: &[f64], x2: &[f64], y1: f64, y2: f64) -> Result<f64> {
        self.check_point(x1)?;
        self.check_point(x2)?;
        if y1 < y2 || y2 <= 0.0 {
            return Ok(0.0);
        }
        let a = self.alpha;
        Ok(a * a
            * self.weight(y2)
            * (y1 + self.q * l1(x1)).powf(-a - 1.0)
            * (y2 + self.q * l1(x2)).powf(-a - 1.0))
    }

    /// P(|X^{(1)}| ≤ r). The shell integral over |x| ≤ r is done in closed
    /// form inside the y-integral:
    ///
    /// ```text
    /// ∫_0^r s^{d−1} (y+qs)^{−α−1} ds
    ///   = q^{−d} Σ_j C(d−1, j) (−y)^{d−1−j} [(y+qr)^{j−α} − y^{j−α}]/(j−α).
    /// ```
    pub fn radial_cdf(&self, r: f64) -> f64 {
        if !(r > 0.0) {
            return 0.0;
        }
        if r == f64::INFINITY {
            return 1.0;
        }
        let d = self.d;
        let a = self.alpha;
        let q = self.q;
        let norm = self.sphere_measure(1.0) / q.powi(d as i32);
        let inner = |y: f64| -> f64 {
            if y <= 0.0 {
                return 0.0;
            }
            if d == 1 {
                // y^{−α} − (y+qr)^{−α}, written to avoid cancellation
                let ratio = (q * r / y).ln_1p();
                return y.powf(-a) * -(-a * ratio).exp_m1() / a;
            }
            let u = y + q * r;
            let mut acc = 0.0;
            let mut binom = 1.0;
            for j in 0..d {
                let jf = j as f64;
                let sign = if (d - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
                acc += binom * sign * y.powi((d - 1 - j) as i32) * (u.powf(jf - a) - y.powf(jf - a))
                    / (jf - a);
                binom = binom * (d - 1 - j) as f64 / (j + 1) as f64;
            }
            acc
        };
        let v = a * norm
            * half_line(
                |y| self.weight(y) * inner(y),
                &self.breaks(q * r),
                QUAD_TOL,
            );
        v.clamp(0.0, 1.0)
    }

    /// ∫_{R^d} p, integrating the density over ℓ1 shells by nested
    /// quadrature. Equals 1 up to quadrature error.
    pub fn x1_total_mass(&self) -> f64 {
        let scale = self.y_scale() / self.q;
        half_line(
            |s| self.x1_density_norm(s) * self.sphere_measure(s),
            &[0.1 * scale, scale, 10.0 * scale],
            1e-9,
        )
    }

    /// ∫_{R^d} p(x₁, x₂) dx₂ at |x₁| = n1, by nested quadrature.
    pub fn joint_marginal_norm(&self, n1: f64) -> f64 {
        let scale = self.y_scale() / self.q;
        half_line(
            |s| self.joint_density_norm(n1, s) * self.sphere_measure(s),
            &[0.1 * scale, scale, 10.0 * scale, n1],
            1e-9,
        )
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::invalid(
                "x",
                format!("expected a point in R^{}, got {} coordinates", self.d, x.len()),
            ));
        }
        Ok(())
    }
}
