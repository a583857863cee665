//! Geometry and path combinatorics of Z^d under the ℓ1 norm.
//!
//! Path counts are exact big integers; logarithms are taken only at the end
//! so the counting bounds can be checked without rounding in the counts.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the step budget of [`visiting_path_count`].
pub const DEFAULT_DP_BUDGET: u64 = 24;

/// A lattice point of Z^d.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "a site needs at least one coordinate");
        Site(coords)
    }

    pub fn origin(d: usize) -> Self {
        Site::new(vec![0; d])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> u64 {
        l1_norm(&self.0)
    }

    pub fn distance(&self, other: &Site) -> u64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    /// Nearest neighbours, in the fixed order +e_1, -e_1, +e_2, ...
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |i| {
            [1i64, -1].into_iter().map(move |s| {
                let mut c = self.0.clone();
                c[i] += s;
                Site(c)
            })
        })
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site::new(v)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        f.pad(&format!("({})", coords.join(",")))
    }
}

pub fn l1_norm(z: &[i64]) -> u64 {
    z.iter().map(|c| c.unsigned_abs()).sum()
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn binomial_f64(n: f64, k: u32) -> f64 {
    if n < k as f64 {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i as f64) / (i + 1) as f64)
}

/// Number of sites with |z| = r in Z^d.
pub fn shell_count(d: usize, r: u64) -> u128 {
    if r == 0 {
        return 1;
    }
    (1..=d as u64)
        .map(|k| (1u128 << k) * binomial_u128(d as u64, k) * binomial_u128(r - 1, k - 1))
        .sum()
}

/// Number of sites with |z| ≤ r in Z^d (ℓ_r).
pub fn ball_count(d: usize, r: u64) -> u128 {
    (0..=d as u64)
        .map(|k| (1u128 << k) * binomial_u128(d as u64, k) * binomial_u128(r, k))
        .sum()
}

/// Floating-point ball count, usable for radii far beyond integer range.
pub fn ball_count_f64(d: usize, r: f64) -> f64 {
    (0..=d as u32)
        .map(|k| 2f64.powi(k as i32) * binomial_f64(d as f64, k) * binomial_f64(r, k))
        .sum()
}

/// Calls `f` on every site of the shell {|z| = r}.
pub fn for_each_in_shell(d: usize, r: u64, mut f: impl FnMut(&[i64])) {
    // shells in low dimension are tiny, so keep the buffer off the heap
    let mut stack = [0i64; 8];
    let mut heap;
    let buf = if d <= stack.len() {
        &mut stack[..d]
    } else {
        heap = vec![0i64; d];
        &mut heap[..]
    };
    fill_shell(buf, 0, r as i64, &mut f);
}

fn fill_shell(buf: &mut [i64], i: usize, rem: i64, f: &mut impl FnMut(&[i64])) {
    let d = buf.len();
    if i == d - 1 {
        buf[i] = rem;
        f(buf);
        if rem != 0 {
            buf[i] = -rem;
            f(buf);
        }
        return;
    }
    for v in -rem..=rem {
        buf[i] = v;
        fill_shell(buf, i + 1, rem - v.abs(), f);
    }
}

/// Calls `f` on every site of the ball {|z| ≤ r}, shell by shell.
pub fn for_each_in_ball(d: usize, r: u64, mut f: impl FnMut(&[i64])) {
    for s in 0..=r {
        for_each_in_shell(d, s, &mut f);
    }
}

/// N(z): number of shortest (length |z|) paths from the origin to `z`,
/// the multinomial |z|! / Π |z_i|!.
pub fn shortest_path_count(z: &[i64]) -> BigUint {
    let mut acc = BigUint::one();
    let mut placed: u64 = 0;
    for c in z {
        let k = c.unsigned_abs();
        // multiply by C(placed + k, k), one factor at a time to stay exact
        for j in 1..=k {
            acc *= placed + j;
            acc /= j;
        }
        placed += k;
    }
    acc
}

/// N(n, z): number of n-step nearest-neighbour paths from the origin that
/// visit `z` at least once (time 0 included).
///
/// Dynamic programming over (time, position, visited flag); positions are
/// restricted to the ball |x| ≤ n. Rejects `n > budget`.
pub fn visiting_path_count(n: u64, z: &[i64], budget: u64) -> Result<BigUint> {
    if n > budget {
        return Err(Error::DpBudgetExceeded { n, budget });
    }
    let d = z.len();
    let norm = l1_norm(z);
    if n < norm {
        return Ok(BigUint::zero());
    }
    let side = 2 * n as usize + 1;
    let len = side.pow(d as u32);
    let offset = n as i64;
    let index = |x: &[i64]| -> usize {
        x.iter()
            .fold(0usize, |acc, &c| acc * side + (c + offset) as usize)
    };
    let target = index(z);
    let mut strides = vec![1usize; d];
    for i in (0..d.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * side;
    }

    // fresh[x]: paths at x that have not yet visited z; seen[x]: have visited
    let mut fresh = vec![BigUint::zero(); len];
    let mut seen = vec![BigUint::zero(); len];
    let origin = index(&vec![0; d]);
    if origin == target {
        seen[origin] = BigUint::one();
    } else {
        fresh[origin] = BigUint::one();
    }

    let mut coords = vec![0i64; d];
    for step in 0..n {
        let mut next_fresh = vec![BigUint::zero(); len];
        let mut next_seen = vec![BigUint::zero(); len];
        for idx in 0..len {
            if fresh[idx].is_zero() && seen[idx].is_zero() {
                continue;
            }
            decode(idx, side, offset, &mut coords);
            if l1_norm(&coords) > step {
                continue;
            }
            for i in 0..d {
                for s in [1i64, -1] {
                    let c = coords[i] + s;
                    if c.abs() > offset {
                        continue;
                    }
                    let nidx = if s > 0 {
                        idx + strides[i]
                    } else {
                        idx - strides[i]
                    };
                    if nidx == target {
                        next_seen[nidx] += &fresh[idx];
                    } else {
                        next_fresh[nidx] += &fresh[idx];
                    }
                    next_seen[nidx] += &seen[idx];
                }
            }
        }
        fresh = next_fresh;
        seen = next_seen;
    }
    Ok(seen.into_iter().sum())
}

fn decode(mut idx: usize, side: usize, offset: i64, out: &mut [i64]) {
    for c in out.iter_mut().rev() {
        *c = (idx % side) as i64 - offset;
        idx /= side;
    }
}

/// Natural logarithm of a big integer, exact up to f64 rounding even when
/// the integer itself is far outside f64 range.
pub fn big_ln(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().expect("64-bit prefix");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// η(z) = log N(z). Zero whenever z lies on a coordinate axis.
pub fn eta(z: &[i64]) -> f64 {
    if z.iter().filter(|&&c| c != 0).count() <= 1 {
        return 0.0;
    }
    big_ln(&shortest_path_count(z))
}

/// η(n, z) = log N(n, z).
pub fn eta_n(n: u64, z: &[i64], budget: u64) -> Result<f64> {
    let count = visiting_path_count(n, z, budget)?;
    if count.is_zero() {
        return Err(Error::EmptyPathSet {
            n,
            site: Site::new(z.to_vec()).to_string(),
        });
    }
    Ok(big_ln(&count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_norm_examples() {
        assert_eq!(l1_norm(&[0, 0]), 0);
        assert_eq!(l1_norm(&[2, -1]), 3);
        assert_eq!(l1_norm(&[-5]), 5);
    }

    #[test]
    fn shell_count_examples() {
        assert_eq!(shell_count(2, 1), 4);
        assert_eq!(shell_count(2, 2), 8);
        assert_eq!(shell_count(1, 7), 2);
        assert_eq!(shell_count(3, 0), 1);
    }

    #[test]
    fn shell_enumeration_matches_count() {
        for d in 1..=3 {
            for r in 0..=6 {
                let mut n = 0u128;
                for_each_in_shell(d, r, |z| {
                    assert_eq!(l1_norm(z), r);
                    n += 1;
                });
                assert_eq!(n, shell_count(d, r), "d={d} r={r}");
            }
        }
    }

    #[test]
    fn ball_count_sums_shells() {
        for d in 1..=4 {
            let mut acc = 0u128;
            for r in 0..=12 {
                acc += shell_count(d, r);
                assert_eq!(ball_count(d, r), acc);
                assert!((ball_count_f64(d, r as f64) - acc as f64).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn shortest_path_count_examples() {
        assert_eq!(shortest_path_count(&[2, 1]), BigUint::from(3u32));
        assert_eq!(shortest_path_count(&[5]), BigUint::from(1u32));
        assert_eq!(shortest_path_count(&[1, 1, 1]), BigUint::from(6u32));
        assert_eq!(shortest_path_count(&[0, 0]), BigUint::from(1u32));
        assert_eq!(shortest_path_count(&[-2, 1]), BigUint::from(3u32));
    }

    #[test]
    fn visiting_path_count_examples() {
        let b = DEFAULT_DP_BUDGET;
        assert_eq!(visiting_path_count(3, &[1], b).unwrap(), BigUint::from(5u32));
        assert_eq!(visiting_path_count(2, &[3], b).unwrap(), BigUint::zero());
        assert_eq!(visiting_path_count(2, &[1, 1], b).unwrap(), BigUint::from(2u32));
        // the origin is always visited
        assert_eq!(visiting_path_count(3, &[0, 0], b).unwrap(), BigUint::from(64u32));
    }

    #[test]
    fn visiting_path_count_rejects_budget() {
        assert!(matches!(
            visiting_path_count(30, &[1], 20),
            Err(Error::DpBudgetExceeded { n: 30, budget: 20 })
        ));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(&[5]), 0.0);
        let e = eta_n(3, &[1], DEFAULT_DP_BUDGET).unwrap();
        assert!((e - 5f64.ln()).abs() < 1e-12);
        assert!((eta(&[2, 1]) - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(
            eta_n(2, &[3], DEFAULT_DP_BUDGET),
            Err(Error::EmptyPathSet { .. })
        ));
    }

    #[test]
    fn big_ln_matches_float_for_huge_counts() {
        // N((300, 300)) = C(600, 300)
        let n = shortest_path_count(&[300, 300]);
        let expected = statrs::function::gamma::ln_gamma(601.0)
            - 2.0 * statrs::function::gamma::ln_gamma(301.0);
        assert!((big_ln(&n) - expected).abs() < 1e-9 * expected);
        let huge = shortest_path_count(&[1000, 1000]);
        let expected = statrs::function::gamma::ln_gamma(2001.0)
            - 2.0 * statrs::function::gamma::ln_gamma(1001.0);
        assert!((big_ln(&huge) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn neighbors_are_unit_steps() {
        let z = Site::new(vec![1, -2]);
        let nb: Vec<_> = z.neighbors().collect();
        assert_eq!(nb.len(), 4);
        assert!(nb.iter().all(|y| y.distance(&z) == 1));
        assert_eq!(z.to_string(), "(1,-2)");
    }
}
