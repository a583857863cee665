//! The lattice heat equation with random potential
//!
//! ```text
//! ∂_t u = Δu + ξu,   u(0, ·) = 1_0,
//! ```
//!
//! on the ℓ∞ box [−R, R]^d with zero (Dirichlet) values outside, and a
//! Feynman–Kac Monte Carlo estimator of the total mass U(t) = Σ_z u(t, z).
//!
//! The solution is stored as u = w·e^{m(t)} with Σ w = 1, so it never
//! overflows even though log U(t) grows like t·max ξ.
//!
//! One step of length h is the Strang splitting
//!
//! ```text
//! D(h/2) · P(h/m)^m · D(h/2),   D(s) = diag exp((ξ − max ξ)·s),
//! ```
//!
//! where P(τ) is the transition kernel of the walk killed on leaving the
//! box: per axis, the free kernel e^{−2τ} I_j(2τ) with signed mirror images
//! across the walls. P is positive, so w stays nonnegative. An explicit Euler step I + τΔ would make at most one jump
//! per substep, which underweights the fast long-range moves that reach a
//! distant high peak by hundreds of orders of magnitude; the exact kernel
//! has no such bias. Steps are controlled by step doubling: a full step and
//! two half steps are compared, and the accepted state is their Richardson
//! combination.
//!
//! Values live on tiles with individual log scales, so the far front of
//! the solution stays representable long before it carries any mass.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, Poisson};

use crate::error::{Error, Result};
use crate::lattice::{eta, l1_norm, Site};
use crate::potential::{PotentialField, ScalingBundle};
use crate::rng::substream;
use crate::variational::{phi, top_k_scan, PhiScanResult, ScanConfig};

/// Step-size and box controls of [`evolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Local error tolerance per accepted step (max-norm on normalized w,
    /// and absolute on the log-mass increment).
    pub tol: f64,
    /// Grow the box once the mass on its outer layer exceeds this fraction.
    pub boundary_threshold: f64,
    /// Radius factor applied when the box grows.
    pub box_growth: f64,
    /// Largest admissible box radius.
    pub radius_cap: usize,
    /// First trial step.
    pub initial_step: f64,
    /// Steps are capped at max_phase/(max ξ − min ξ) over the box.
    pub max_phase: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            boundary_threshold: 1e-10,
            box_growth: 1.5,
            radius_cap: 100_000,
            initial_step: 1e-3,
            max_phase: 1.0,
        }
    }
}

/// Box radius covering the relevant sites up to time t: 2·r_t·g_t.
pub fn default_box_radius(bundle: &ScalingBundle, t: f64) -> usize {
    match bundle.at(t) {
        Ok(s) => ((2.0 * s.r_t * s.g_t).ceil() as usize).max(4),
        Err(_) => 4,
    }
}

/// Square tiles of the box; every tile carries its own log scale so that
/// the far front of the solution, many hundreds of orders of magnitude
/// below the bulk, is still represented.
#[derive(Clone, Debug)]
struct Tiling {
    d: usize,
    /// side length of a tile
    len: usize,
    count: usize,
    tile_of: Vec<u32>,
    /// Adjacent tile per direction: index 2l is the +1 neighbour along the
    /// axis of stride side^l, 2l+1 the −1 neighbour; `NONE` at the edge.
    adjacent: Vec<u32>,
}

const NONE: u32 = u32::MAX;
/// Largest log-scale difference kept between adjacent occupied tiles.
const SCALE_SPREAD: f64 = 600.0;

impl Tiling {
    fn new(d: usize, side: usize) -> Self {
        let b = match d {
            1 => 32,
            2 => 16,
            _ => 8,
        }
        .min(side);
        let per_dim = side.div_ceil(b);
        let count = pow_usize(per_dim, d);
        let n = pow_usize(side, d);
        let mut tile_of = vec![0u32; n];
        for (i, t) in tile_of.iter_mut().enumerate() {
            let (mut j, mut id, mut mult) = (i, 0usize, 1usize);
            for _ in 0..d {
                id += (j % side) / b * mult;
                j /= side;
                mult *= per_dim;
            }
            *t = id as u32;
        }
        let mut adjacent = vec![NONE; count * 2 * d];
        for id in 0..count {
            let mut rest = id;
            let mut tstride = 1usize;
            for l in 0..d {
                let c = rest % per_dim;
                rest /= per_dim;
                if c + 1 < per_dim {
                    adjacent[id * 2 * d + 2 * l] = (id + tstride) as u32;
                }
                if c > 0 {
                    adjacent[id * 2 * d + 2 * l + 1] = (id - tstride) as u32;
                }
                tstride *= per_dim;
            }
        }
        Tiling {
            d,
            len: b,
            count,
            tile_of,
            adjacent,
        }
    }

    fn neighbours(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacent[t * 2 * self.d..(t + 1) * 2 * self.d]
            .iter()
            .filter(|a| **a != NONE)
            .map(|a| *a as usize)
    }
}

/// Normalized solution on an ℓ∞ box: w(z) = v(z)·e^{s(tile of z)}, Σ w = 1.
#[derive(Clone, Debug)]
pub struct SolverState {
    d: usize,
    radius: usize,
    values: Vec<f64>,
    scales: Vec<f64>,
    tiling: Tiling,
    log_offset: f64,
    time: f64,
    boundary_mass_fraction: f64,
    error_estimate: f64,
    steps: u64,
    trial_step: f64,
    xi: Vec<f64>,
    xi_for: Option<(usize, u64)>,
}

fn pow_usize(base: usize, e: usize) -> usize {
    (0..e).fold(1usize, |acc, _| acc * base)
}

impl SolverState {
    /// u(0, ·) = 1_0 on [−radius, radius]^d.
    pub fn new(d: usize, radius: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        let side = 2 * radius + 1;
        let len = (side as f64).powi(d as i32);
        if len > 5e8 {
            return Err(Error::invalid("radius", format!("box of {len:e} sites is too large")));
        }
        let mut values = vec![0.0; pow_usize(side, d)];
        let center = values.len() / 2;
        values[center] = 1.0;
        let tiling = Tiling::new(d, side);
        Ok(SolverState {
            d,
            radius,
            values,
            scales: vec![0.0; tiling.count],
            tiling,
            log_offset: 0.0,
            time: 0.0,
            boundary_mass_fraction: 0.0,
            error_estimate: 0.0,
            steps: 0,
            trial_step: 0.0,
            xi: Vec::new(),
            xi_for: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// m(t) = log U(t), since Σ w = 1.
    pub fn log_total_mass(&self) -> f64 {
        self.log_offset
    }

    pub fn boundary_mass_fraction(&self) -> f64 {
        self.boundary_mass_fraction
    }

    /// Accumulated estimate of the error in log U(t).
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn accepted_steps(&self) -> u64 {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        if z.len() != self.d {
            return None;
        }
        let r = self.radius as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &c in z {
            if c < -r || c > r {
                return None;
            }
            idx = idx * side + (c + r) as usize;
        }
        Some(idx)
    }

    pub fn site_of(&self, mut idx: usize) -> Site {
        let side = self.side();
        let r = self.radius as i64;
        let mut c = vec![0i64; self.d];
        for k in (0..self.d).rev() {
            c[k] = (idx % side) as i64 - r;
            idx /= side;
        }
        Site::new(c)
    }

    fn log_w_at(&self, i: usize) -> f64 {
        self.values[i].ln() + self.scales[self.tiling.tile_of[i] as usize]
    }

    /// Normalized weights w in index order (far values may underflow to 0).
    pub fn weights(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.log_w_at(i).exp()).collect()
    }

    /// Normalized weight w(z); zero outside the box.
    pub fn w(&self, z: &[i64]) -> f64 {
        self.log_w(z).exp()
    }

    /// log w(z), finite where w itself underflows; −∞ outside the box.
    pub fn log_w(&self, z: &[i64]) -> f64 {
        self.index_of(z).map_or(f64::NEG_INFINITY, |i| self.log_w_at(i))
    }

    /// log u(t, z) = log w(z) + m(t); −∞ where the solution vanishes.
    pub fn log_u(&self, z: &[i64]) -> f64 {
        self.index_of(z)
            .map_or(f64::NEG_INFINITY, |i| self.log_w_at(i) + self.log_offset)
    }

    /// Site of the largest w; ties go to the lexicographically smallest site.
    pub fn argmax(&self) -> Site {
        let mut best = 0;
        let mut best_log = f64::NEG_INFINITY;
        for i in 0..self.values.len() {
            // index order is lexicographic order, so strict > keeps the first
            let l = self.log_w_at(i);
            if l > best_log {
                best = i;
                best_log = l;
            }
        }
        self.site_of(best)
    }

    /// CSV `z_1..z_d,w,log_u` over all sites with w > 0.
    pub fn write_snapshot(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.d).map(|i| format!("z_{i}")).collect();
        header.push("w".into());
        header.push("log_u".into());
        wtr.write_record(&header)?;
        for i in 0..self.values.len() {
            if self.values[i] > 0.0 {
                let z = self.site_of(i);
                let lw = self.log_w_at(i);
                let mut row: Vec<String> = z.coords().iter().map(|c| c.to_string()).collect();
                row.push(lw.exp().to_string());
                row.push((lw + self.log_offset).to_string());
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    fn ensure_xi(&mut self, field: &PotentialField) {
        let key = (self.radius, field_key(field));
        if self.xi_for == Some(key) && self.xi.len() == self.values.len() {
            return;
        }
        let n = self.values.len();
        let xi: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| field.xi(self.site_of(i).coords()))
            .collect();
        self.xi = xi;
        self.xi_for = Some(key);
    }

    /// Mass on the outer layer {|z|_∞ = R}.
    fn boundary_mass(&self) -> f64 {
        if self.radius == 0 {
            return 1.0;
        }
        let side = self.side();
        let mut total = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut j = i;
            for _ in 0..self.d {
                let c = j % side;
                if c == 0 || c == side - 1 {
                    total += self.log_w_at(i).exp();
                    break;
                }
                j /= side;
            }
        }
        total
    }

    /// Per-tile sums of v.
    fn tile_sums(&self, v: &[f64], sums: &mut [f64]) {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (x, &t) in v.iter().zip(&self.tiling.tile_of) {
            sums[t as usize] += x;
        }
    }

    /// log Σ_z v(z)·e^{s(tile of z)}.
    fn log_mass(&self, v: &[f64], sums: &mut [f64]) -> f64 {
        self.tile_sums(v, sums);
        let top = sums
            .iter()
            .zip(&self.scales)
            .filter(|(s, _)| **s > 0.0)
            .map(|(_, sc)| *sc)
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = sums
            .iter()
            .zip(&self.scales)
            .filter(|(s, _)| **s > 0.0)
            .map(|(s, sc)| s * (sc - top).exp())
            .sum();
        top + total.ln()
    }

    /// Moves each tile's maximum into its scale, keeps adjacent occupied
    /// tiles within `SCALE_SPREAD` of each other, and gives empty tiles
    /// the largest scale among their neighbours.
    fn rescale_tiles(&mut self) {
        let count = self.tiling.count;
        let mut mx = vec![0.0f64; count];
        for (x, &t) in self.values.iter().zip(&self.tiling.tile_of) {
            let m = &mut mx[t as usize];
            if *x > *m {
                *m = *x;
            }
        }
        for (t, &m) in mx.iter().enumerate() {
            if m > 0.0 {
                self.scales[t] += m.ln();
            }
        }
        for (x, &t) in self.values.iter_mut().zip(&self.tiling.tile_of) {
            let m = mx[t as usize];
            if m > 0.0 {
                *x /= m;
            }
        }
        let occupied: Vec<bool> = mx.iter().map(|m| *m > 0.0).collect();
        let mut lifted = vec![f64::NAN; count];
        for _ in 0..count {
            let mut changed = false;
            for t in 0..count {
                if !occupied[t] {
                    continue;
                }
                let target = self
                    .tiling
                    .neighbours(t)
                    .filter(|n| occupied[*n])
                    .map(|n| self.scales[n])
                    .fold(f64::NEG_INFINITY, f64::max)
                    - SCALE_SPREAD;
                if self.scales[t] < target {
                    lifted[t] = if lifted[t].is_nan() { self.scales[t] } else { lifted[t] };
                    self.scales[t] = target;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if lifted.iter().any(|l| !l.is_nan()) {
            for (x, &t) in self.values.iter_mut().zip(&self.tiling.tile_of) {
                let old = lifted[t as usize];
                if !old.is_nan() {
                    *x *= (old - self.scales[t as usize]).exp();
                }
            }
        }
        for t in 0..count {
            if !occupied[t] {
                let best = self
                    .tiling
                    .neighbours(t)
                    .filter(|n| occupied[*n])
                    .map(|n| self.scales[n])
                    .fold(f64::NEG_INFINITY, f64::max);
                if best.is_finite() {
                    self.scales[t] = best;
                }
            }
        }
    }

    /// Re-embeds the solution into a box of radius `new_radius`.
    fn grow(&mut self, new_radius: usize) -> Result<()> {
        let mut bigger = SolverState::new(self.d, new_radius)?;
        bigger.values.iter_mut().for_each(|v| *v = 0.0);
        // carry log weights over, then rebuild the tile scales
        let mut logs = vec![f64::NEG_INFINITY; bigger.values.len()];
        for i in 0..self.values.len() {
            if self.values[i] > 0.0 {
                let z = self.site_of(i);
                let j = bigger.index_of(z.coords()).expect("old box inside new box");
                logs[j] = self.log_w_at(i);
            }
        }
        let mut top = vec![f64::NEG_INFINITY; bigger.tiling.count];
        for (l, &t) in logs.iter().zip(&bigger.tiling.tile_of) {
            top[t as usize] = top[t as usize].max(*l);
        }
        for (t, s) in top.iter().enumerate() {
            bigger.scales[t] = if s.is_finite() { *s } else { 0.0 };
        }
        for (j, l) in logs.iter().enumerate() {
            if l.is_finite() {
                bigger.values[j] = (l - bigger.scales[bigger.tiling.tile_of[j] as usize]).exp();
            }
        }
        self.radius = new_radius;
        self.values = bigger.values;
        self.scales = bigger.scales;
        self.tiling = bigger.tiling;
        self.xi_for = None;
        self.rescale_tiles();
        Ok(())
    }
}

/// Identifies a field well enough to know when cached ξ values are stale.
fn field_key(field: &PotentialField) -> u64 {
    match field {
        PotentialField::Pareto(p) => {
            let s = p.spec();
            s.seed ^ (s.d as u64).rotate_left(48) ^ s.alpha.to_bits().rotate_left(7)
        }
        PotentialField::Explicit(e) => e.background().to_bits() ^ e.support_radius().rotate_left(32) ^ 0xE,
        PotentialField::Shifted { base, shift } => field_key(base) ^ shift.to_bits().rotate_left(13) ^ 0x5,
    }
}

/// Transition kernel of one coordinate of the free walk over time τ,
/// e^{−2τ} I_j(2τ) for j = 0..=K, where K is the first order at which the
/// Poisson(`rate`·τ) tail drops below 1e−16. `rate` bounds the jump rate
/// along the cheapest paths, which the potential can push far above 2.
fn walk_kernel(tau: f64, rate: f64) -> Vec<f64> {
    let x = tau * rate.max(2.0);
    let mut reach = 1usize;
    let mut term = x;
    while term > 1e-16 && reach < 256 {
        reach += 1;
        term *= x / reach as f64;
    }
    let decay = (-2.0 * tau).exp();
    (0..=reach)
        .map(|j| {
            // I_j(2τ) = Σ_m τ^{2m+j}/(m!(m+j)!)
            let mut t = (0..j).fold(1.0, |acc, i| acc * tau / (i + 1) as f64);
            let mut sum = 0.0;
            for m in 0..500 {
                sum += t;
                t *= tau * tau / ((m + 1) as f64 * (m + 1 + j) as f64);
                if t <= 1e-18 * sum {
                    break;
                }
            }
            decay * sum
        })
        .collect()
}

/// Work buffers for one splitting step.
struct Stepper<'a> {
    d: usize,
    side: usize,
    tile_len: usize,
    xi: &'a [f64],
    tile_of: &'a [u32],
    shift: f64,
    /// max ξ − min ξ over the box
    spread: f64,
    /// e^{s(neighbour tile) − s(tile)} per tile and direction
    cross: Vec<f64>,
    scratch: Vec<f64>,
    quarter: Vec<f64>,
    half: Vec<f64>,
    kernel_full: Vec<f64>,
    kernel_half: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(d: usize, side: usize, tile_len: usize, xi: &'a [f64], tile_of: &'a [u32]) -> Self {
        let shift = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let low = xi.iter().copied().fold(f64::INFINITY, f64::min);
        Stepper {
            d,
            side,
            tile_len,
            xi,
            tile_of,
            shift,
            spread: shift - low,
            cross: Vec::new(),
            scratch: vec![0.0; xi.len()],
            quarter: vec![0.0; xi.len()],
            half: vec![0.0; xi.len()],
            kernel_full: Vec::new(),
            kernel_half: Vec::new(),
        }
    }

    fn set_scales(&mut self, tiling: &Tiling, scales: &[f64]) {
        let dirs = 2 * self.d;
        self.cross.clear();
        self.cross.resize(tiling.count * dirs, 0.0);
        for t in 0..tiling.count {
            for k in 0..dirs {
                let a = tiling.adjacent[t * dirs + k];
                if a != NONE {
                    self.cross[t * dirs + k] = (scales[a as usize] - scales[t]).clamp(-700.0, 700.0).exp();
                }
            }
        }
    }

    /// dst ← Dirichlet walk kernel along axis `l` applied to src. The walk
    /// is killed on leaving the box; since it is nearest-neighbour, the
    /// killed kernel is the free one plus signed mirror images across the
    /// walls at −1 and n. Each line is cut into tile segments and the halo
    /// of a segment is brought into the segment's scale before a plain
    /// convolution. The kernel reach never exceeds one tile unless the line
    /// is a single tile, so halo sources lie in the same or an adjacent tile.
    fn convolve_axis(&self, src: &[f64], dst: &mut [f64], l: usize, kernel: &[f64], tile_len: usize) {
        let n = self.side;
        let dirs = 2 * self.d;
        let reach = kernel.len() - 1;
        let stride = pow_usize(n, l);
        let block = stride * n;
        let period = 2 * (n as i64 + 1);
        // virtual position → (index in the line, sign), or None on a wall
        let image = |v: i64| -> Option<(usize, f64)> {
            let w = (v + 1).rem_euclid(period);
            let n1 = n as i64 + 1;
            if w == 0 || w == n1 {
                None
            } else if w < n1 {
                Some(((w - 1) as usize, 1.0))
            } else {
                Some(((2 * n1 - 1 - w) as usize, -1.0))
            }
        };
        let mut line = vec![0.0; n];
        let mut seg = vec![0.0; tile_len.min(n) + 2 * reach];
        for base in (0..src.len()).step_by(block) {
            for off in 0..stride {
                let first = base + off;
                for (c, x) in line.iter_mut().enumerate() {
                    *x = src[first + c * stride];
                }
                let mut a = 0;
                while a < n {
                    let b = (a + tile_len).min(n);
                    let tile = self.tile_of[first + a * stride] as usize;
                    let width = b - a;
                    let seg = &mut seg[..width + 2 * reach];
                    seg[reach..reach + width].copy_from_slice(&line[a..b]);
                    let halo = (0..reach).chain(reach + width..width + 2 * reach);
                    for k in halo {
                        let v = a as i64 + k as i64 - reach as i64;
                        seg[k] = match image(v) {
                            None => 0.0,
                            Some((i, sign)) => {
                                let f = if i >= a && i < b {
                                    1.0
                                } else if i >= b {
                                    self.cross[tile * dirs + 2 * l]
                                } else {
                                    self.cross[tile * dirs + 2 * l + 1]
                                };
                                sign * line[i] * f
                            }
                        };
                    }
                    for c in 0..width {
                        let centre = c + reach;
                        let mut acc = kernel[0] * seg[centre];
                        for (k, &w) in kernel.iter().enumerate().skip(1) {
                            acc += w * (seg[centre - k] + seg[centre + k]);
                        }
                        dst[first + (a + c) * stride] = acc.max(0.0);
                    }
                    a = b;
                }
            }
        }
    }

    /// Sets the diagonal factors exp((ξ − shift)·h/4), exp((ξ − shift)·h/2)
    /// and the walk kernels for a full step h made of `m` kernel substeps.
    fn set_step(&mut self, h: f64, m: usize) {
        let s = self.shift;
        for ((q, f), &x) in self.quarter.iter_mut().zip(self.half.iter_mut()).zip(self.xi) {
            *q = ((x - s) * 0.25 * h).exp();
            *f = *q * *q;
        }
        let rate = self.spread;
        self.kernel_full = walk_kernel(h / m as f64, rate);
        self.kernel_half = walk_kernel(0.5 * h / m as f64, rate);
    }

    /// One splitting step from `v` into `out` (unnormalized), using the
    /// factors and kernels of a full step or of a half step.
    fn step(&mut self, v: &[f64], out: &mut Vec<f64>, m: usize, half_step: bool) {
        let (factor, kernel) = if half_step {
            (std::mem::take(&mut self.quarter), std::mem::take(&mut self.kernel_half))
        } else {
            (std::mem::take(&mut self.half), std::mem::take(&mut self.kernel_full))
        };
        out.clear();
        out.extend(v.iter().zip(&factor).map(|(x, f)| x * f));
        let mut scratch = std::mem::take(&mut self.scratch);
        for _ in 0..m {
            for l in 0..self.d {
                self.convolve_axis(out, &mut scratch, l, &kernel, self.tile_len);
                std::mem::swap(out, &mut scratch);
            }
        }
        self.scratch = scratch;
        for (x, f) in out.iter_mut().zip(&factor) {
            *x *= f;
        }
        if half_step {
            self.quarter = factor;
            self.kernel_half = kernel;
        } else {
            self.half = factor;
            self.kernel_full = kernel;
        }
    }

    /// Kernel substeps needed so that the kernel reach fits in one tile.
    fn substeps(&self, h: f64, tile_len: usize) -> usize {
        // a single tile per line has no cross factors to respect
        let limit = if self.side <= tile_len { 128 } else { tile_len };
        let mut m = 1;
        while walk_kernel(h / m as f64, self.spread).len() - 1 > limit && m < 1 << 20 {
            m *= 2;
        }
        m
    }
}

/// Advances `state` to `t_target`; see the module docs for the scheme.
pub fn evolve(
    field: &PotentialField,
    mut state: SolverState,
    t_target: f64,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    state.advance(field, t_target, cfg)?;
    Ok(state)
}

impl SolverState {
    pub fn advance(&mut self, field: &PotentialField, t_target: f64, cfg: &SolverConfig) -> Result<()> {
        if field.dim() != self.d {
            return Err(Error::invalid("field", "dimension differs from the solver box"));
        }
        if !(t_target >= self.time) || !t_target.is_finite() {
            return Err(Error::invalid(
                "t_target",
                format!("need finite t_target >= {}, got {t_target}", self.time),
            ));
        }
        if !(cfg.tol > 0.0) {
            return Err(Error::invalid("tol", "need tol > 0"));
        }
        if self.radius > cfg.radius_cap {
            return Err(Error::BoxCapExceeded {
                requested: self.radius,
                cap: cfg.radius_cap,
            });
        }
        let mut h = if self.trial_step > 0.0 {
            self.trial_step
        } else {
            cfg.initial_step
        };

        while self.time < t_target {
            self.ensure_xi(field);
            let xi = std::mem::take(&mut self.xi);
            let outcome = self.run_until_growth(&xi, t_target, &mut h, cfg);
            self.xi = xi;
            match outcome? {
                None => break,
                Some(grow_to) => {
                    if grow_to > cfg.radius_cap {
                        return Err(Error::BoxCapExceeded {
                            requested: grow_to,
                            cap: cfg.radius_cap,
                        });
                    }
                    self.grow(grow_to)?;
                }
            }
        }
        self.trial_step = h;
        Ok(())
    }

    /// Steps until `t_target` or until the boundary layer holds too much
    /// mass; in the latter case returns the radius to grow to.
    fn run_until_growth(
        &mut self,
        xi: &[f64],
        t_target: f64,
        h: &mut f64,
        cfg: &SolverConfig,
    ) -> Result<Option<usize>> {
        let tile_of = self.tiling.tile_of.clone();
        let mut st = Stepper::new(self.d, self.side(), self.tiling.len, xi, &tile_of);
        let n = self.values.len();
        let mut full = Vec::with_capacity(n);
        let mut half = Vec::with_capacity(n);
        let mut half2 = Vec::with_capacity(n);
        let mut sums = vec![0.0; self.tiling.count];
        let mut exp_scales = vec![0.0; self.tiling.count];
        let h_min = 1e-14 * t_target.max(1.0);
        let h_max = if st.spread > 0.0 { cfg.max_phase / st.spread } else { f64::INFINITY };
        st.set_scales(&self.tiling, &self.scales);

        while self.time < t_target {
            let remaining = t_target - self.time;
            *h = h.min(h_max);
            let last = *h >= remaining;
            let step = if last { remaining } else { *h };
            let m = st.substeps(step, self.tiling.len);

            st.set_step(step, m);
            st.step(&self.values, &mut full, m, false);
            st.step(&self.values, &mut half, m, true);
            st.step(&half, &mut half2, m, true);
            let lm_full = self.log_mass(&full, &mut sums);
            let lm_half = self.log_mass(&half2, &mut sums);

            for (e, s) in exp_scales.iter_mut().zip(&self.scales) {
                *e = s.exp();
            }
            let (cf, ch) = ((-lm_full).exp(), (-lm_half).exp());
            let dw = full
                .iter()
                .zip(&half2)
                .zip(&tile_of)
                .map(|((a, b), &t)| (a * cf - b * ch).abs() * exp_scales[t as usize])
                .fold(0.0, f64::max);
            let dg = (lm_full - lm_half).abs();
            let err = dw.max(dg);
            if !err.is_finite() || !lm_half.is_finite() {
                return Err(Error::NonFinite { t: self.time });
            }
            // Strang splitting is second order: local error ∝ h³
            let ratio = if err > 0.0 { 0.9 * (cfg.tol / err).cbrt() } else { 4.0 };
            if err <= cfg.tol || step <= h_min {
                // Richardson combination of the two unnormalized results
                for (b, a) in half2.iter_mut().zip(&full) {
                    *b = ((4.0 * *b - a) / 3.0).max(0.0);
                }
                let lm = self.log_mass(&half2, &mut sums);
                if !lm.is_finite() {
                    return Err(Error::NonFinite { t: self.time });
                }
                std::mem::swap(&mut self.values, &mut half2);
                self.log_offset += lm + st.shift * step;
                self.scales.iter_mut().for_each(|s| *s -= lm);
                self.rescale_tiles();
                st.set_scales(&self.tiling, &self.scales);
                self.error_estimate += dg;
                self.time = if last { t_target } else { self.time + step };
                self.steps += 1;
                if !last {
                    *h = step * ratio.clamp(0.2, 4.0);
                }

                self.boundary_mass_fraction = self.boundary_mass();
                if self.boundary_mass_fraction > cfg.boundary_threshold && self.time < t_target {
                    let grown = ((self.radius as f64 * cfg.box_growth).ceil() as usize).max(self.radius + 1);
                    return Ok(Some(grown));
                }
            } else {
                *h = step * ratio.clamp(0.2, 1.0);
            }
        }
        Ok(None)
    }
}

/// Mass shares of the top maximizers of Φ_t in the numerical solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub t: f64,
    pub log_u: f64,
    /// u(t, Z¹)/U(t)
    pub r1: f64,
    /// (u(t, Z¹) + u(t, Z²))/U(t)
    pub r2: f64,
    pub argmax_site: Site,
    pub argmax_in_top2: bool,
    pub boundary_mass_fraction: f64,
}

pub fn localization_report(state: &SolverState, scan: &PhiScanResult) -> Result<LocalizationReport> {
    if (scan.t - state.time).abs() > 1e-9 * scan.t.max(1.0) {
        return Err(Error::invalid(
            "scan",
            format!("scan at t = {} but solver at t = {}", scan.t, state.time),
        ));
    }
    if scan.top.len() < 2 {
        return Err(Error::invalid("scan", "need the top two maximizers"));
    }
    let z1 = &scan.top[0].site;
    let z2 = &scan.top[1].site;
    for z in [z1, z2] {
        if state.index_of(z.coords()).is_none() {
            return Err(Error::OutsideBox {
                site: z.to_string(),
                radius: state.radius,
            });
        }
    }
    let w1 = state.w(z1.coords());
    let w2 = state.w(z2.coords());
    let argmax = state.argmax();
    Ok(LocalizationReport {
        t: state.time,
        log_u: state.log_total_mass(),
        r1: w1.min(1.0),
        r2: (w1 + w2).min(1.0),
        argmax_in_top2: &argmax == z1 || &argmax == z2,
        argmax_site: argmax,
        boundary_mass_fraction: state.boundary_mass_fraction,
    })
}

/// Sampling scheme of [`fk_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Plain simulation of the walk.
    Direct,
    /// Restricted to the event that the walk runs along a shortest path to
    /// `z` by time ρt and then stays there.
    SitAt { z: Site, rho: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    pub seed: u64,
    pub batch_size: usize,
    /// Refuse to run when the predicted relative standard error exceeds this.
    pub max_rel_stderr: f64,
    /// Samples used to predict the relative standard error.
    pub pilot_samples: usize,
}

impl Default for FkConfig {
    fn default() -> Self {
        FkConfig {
            seed: 0,
            batch_size: 1024,
            max_rel_stderr: 0.1,
            pilot_samples: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkEstimate {
    pub n_samples: usize,
    pub mean: f64,
    pub standard_error: f64,
    /// log of `mean`, finite even when `mean` overflows.
    pub log_mean: f64,
}

/// log P(A) for the event A that the walk takes a shortest path to `z`
/// within [0, ρt] (exactly |z| jumps) and does not jump in (ρt, t]:
/// N(z)·Pois(2dρt; |z|)·e^{−2d(1−ρ)t}/(2d)^{|z|}.
pub fn sit_at_log_probability(z: &[i64], rho: f64, t: f64) -> f64 {
    let d = z.len() as f64;
    let n = l1_norm(z);
    let rate = 2.0 * d * rho * t;
    let jumps = if rate > 0.0 {
        Poisson::new(rate).map(|p| p.ln_pmf(n)).unwrap_or(f64::NEG_INFINITY)
    } else if n == 0 {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    eta(z) + jumps - 2.0 * d * (1.0 - rho) * t - n as f64 * (2.0 * d).ln()
}

/// log exp(∫_0^t ξ(X_s) ds) for one path of the walk from the origin.
fn direct_sample(field: &PotentialField, t: f64, rng: &mut ChaCha8Rng, hold: &Exp<f64>) -> f64 {
    let d = field.dim();
    let mut pos = vec![0i64; d];
    let mut time = 0.0;
    let mut integral = 0.0;
    loop {
        let dt: f64 = hold.sample(rng);
        let x = field.xi(&pos);
        if time + dt >= t {
            integral += x * (t - time);
            return integral;
        }
        integral += x * dt;
        time += dt;
        let dir = rng.gen_range(0..2 * d);
        pos[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
    }
}

/// log of P(A)·exp(∫ ξ) along one path drawn conditionally on A.
fn sit_at_sample(field: &PotentialField, t: f64, z: &[i64], rho: f64, log_p: f64, rng: &mut ChaCha8Rng) -> f64 {
    let d = z.len();
    let mut moves: Vec<(usize, i64)> = Vec::new();
    for (i, &c) in z.iter().enumerate() {
        for _ in 0..c.unsigned_abs() {
            moves.push((i, c.signum()));
        }
    }
    moves.shuffle(rng);
    let mut times: Vec<f64> = (0..moves.len()).map(|_| rng.gen::<f64>() * rho * t).collect();
    times.sort_by(f64::total_cmp);
    let mut pos = vec![0i64; d];
    let mut last = 0.0;
    let mut integral = 0.0;
    for ((i, s), tau) in moves.into_iter().zip(times) {
        integral += field.xi(&pos) * (tau - last);
        last = tau;
        pos[i] += s;
    }
    integral += field.xi(&pos) * (t - last);
    log_p + integral
}

fn log_samples(
    field: &PotentialField,
    t: f64,
    n: usize,
    strategy: &Strategy,
    cfg: &FkConfig,
    batch_offset: u64,
) -> Vec<f64> {
    let d = field.dim();
    let hold = Exp::new(2.0 * d as f64).expect("positive rate");
    let log_p = match strategy {
        Strategy::SitAt { z, rho } => sit_at_log_probability(z.coords(), *rho, t),
        Strategy::Direct => 0.0,
    };
    let batches = n.div_ceil(cfg.batch_size);
    let per_batch: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(cfg.seed, batch_offset + b as u64);
            let len = cfg.batch_size.min(n - b * cfg.batch_size);
            (0..len)
                .map(|_| match strategy {
                    Strategy::Direct => direct_sample(field, t, &mut rng, &hold),
                    Strategy::SitAt { z, rho } => sit_at_sample(field, t, z.coords(), *rho, log_p, &mut rng),
                })
                .collect()
        })
        .collect();
    per_batch.into_iter().flatten().collect()
}

fn summarize(logs: &[f64]) -> FkEstimate {
    let n = logs.len();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return FkEstimate {
            n_samples: n,
            mean: 0.0,
            standard_error: 0.0,
            log_mean: f64::NEG_INFINITY,
        };
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let se = (var / n as f64).sqrt();
    let scale = top.exp();
    FkEstimate {
        n_samples: n,
        mean: mean * scale,
        standard_error: se * scale,
        log_mean: mean.ln() + top,
    }
}

/// Monte Carlo estimate of U(t) = E_0 exp(∫_0^t ξ(X_s) ds).
///
/// With [`Strategy::SitAt`] the estimate is of E_0[exp(∫ ξ); A] instead,
/// a lower bound on U(t).
pub fn fk_estimate(
    field: &PotentialField,
    t: f64,
    n: usize,
    strategy: &Strategy,
    cfg: &FkConfig,
) -> Result<FkEstimate> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("need finite t >= 0, got {t}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size", "need batch_size >= 1"));
    }
    if let Strategy::SitAt { z, rho } = strategy {
        if !(*rho > 0.0 && *rho <= 1.0) {
            return Err(Error::invalid("rho", "need 0 < rho <= 1"));
        }
        if z.dim() != field.dim() {
            return Err(Error::invalid("z", "dimension differs from the field"));
        }
    }
    if t == 0.0 {
        let log_p = match strategy {
            Strategy::Direct => 0.0,
            Strategy::SitAt { z, .. } if z.norm() == 0 => 0.0,
            Strategy::SitAt { .. } => f64::NEG_INFINITY,
        };
        return Ok(FkEstimate {
            n_samples: n,
            mean: log_p.exp(),
            standard_error: 0.0,
            log_mean: log_p,
        });
    }

    // the pilot uses its own substreams, disjoint from the main run
    let pilot_n = cfg.pilot_samples.min(n).max(2);
    let pilot = summarize(&log_samples(field, t, pilot_n, strategy, cfg, 1 << 40));
    if pilot.mean > 0.0 {
        let sd = pilot.standard_error * (pilot_n as f64).sqrt();
        let predicted = sd / pilot.mean / (n as f64).sqrt();
        if predicted > cfg.max_rel_stderr {
            return Err(Error::TimeTooLarge {
                t,
                predicted,
                bound: cfg.max_rel_stderr,
            });
        }
    }
    Ok(summarize(&log_samples(field, t, n, strategy, cfg, 0)))
}

/// The solution lower bound from a single strategy: (1/t)·log U(t) ≥
/// Φ_t(z) − 2d − O(log t / t), attained by going straight to z and staying.
pub fn strategy_lower_bound(field: &PotentialField, z: &[i64], t: f64) -> f64 {
    phi(field, t, z).phi - 2.0 * field.dim() as f64
}

/// One grid time of a two-cities track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub z1: Site,
    pub z2: Site,
    pub argmax: Site,
    pub r1: f64,
    pub r2: f64,
    pub log_u: f64,
}

/// A change of the top maximizer between consecutive grid times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t_before: f64,
    pub t_after: f64,
    pub old_site: Site,
    pub new_site: Site,
    /// u(t, old)/u(t, new) at both bracketing times.
    pub split_before: f64,
    pub split_after: f64,
    pub r1_before: f64,
    pub r1_after: f64,
    pub r2_before: f64,
    pub r2_after: f64,
    /// log(u(t, Z²)/U(t)) at both bracketing times. Below about −37 the
    /// second site is lost in rounding and r2 = r1.
    pub log_w2_before: f64,
    pub log_w2_after: f64,
}

impl Transition {
    /// Near a swap two sites share the mass: r2 > r1 at both bracketing
    /// times.
    pub fn shares_mass(&self) -> bool {
        self.r2_before > self.r1_before && self.r2_after > self.r1_after
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoCitiesLog {
    pub points: Vec<TrackPoint>,
    pub transitions: Vec<Transition>,
}

/// Scans and solves along `t_grid`, logging Z¹, Z², the mass split and
/// every change of Z¹.
pub fn two_cities_track(
    field: &PotentialField,
    t_grid: &[f64],
    solver: &SolverConfig,
    scan: &ScanConfig,
    initial_radius: usize,
) -> Result<TwoCitiesLog> {
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("t_grid", "must be strictly increasing"));
    }
    let scans: Vec<PhiScanResult> = t_grid
        .iter()
        .map(|&t| top_k_scan(field, t, 2, scan))
        .collect::<Result<_>>()?;
    Ok(track_scans(field, &scans, solver, initial_radius)?.0)
}

/// Box radius covering every scanned maximizer with a quarter to spare.
pub fn radius_for_scans(scans: &[PhiScanResult], initial_radius: usize) -> usize {
    let reach = scans
        .iter()
        .flat_map(|s| s.top.iter().map(|v| v.site.coords().iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)))
        .max()
        .unwrap_or(0) as usize;
    initial_radius.max(reach + reach / 4 + 2)
}

/// One solver run along the times of `scans` (increasing, k ≥ 2 each),
/// returning the two-cities log and the localization report at each time.
pub fn track_scans(
    field: &PotentialField,
    scans: &[PhiScanResult],
    solver: &SolverConfig,
    initial_radius: usize,
) -> Result<(TwoCitiesLog, Vec<LocalizationReport>)> {
    if scans.windows(2).any(|w| !(w[0].t < w[1].t)) {
        return Err(Error::invalid("scans", "times must be strictly increasing"));
    }
    if scans.iter().any(|s| s.top.len() < 2) {
        return Err(Error::invalid("scans", "need k >= 2"));
    }
    let mut state = SolverState::new(field.dim(), radius_for_scans(scans, initial_radius))?;
    let mut points: Vec<TrackPoint> = Vec::new();
    let mut reports = Vec::with_capacity(scans.len());
    let mut transitions = Vec::new();
    // log w of (Z¹, next Z¹, Z²) at the previous grid time
    let mut prev_w: Option<(f64, f64, f64)> = None;
    for (i, s) in scans.iter().enumerate() {
        state.advance(field, s.t, solver)?;
        let rep = localization_report(&state, s)?;
        let z1 = s.top[0].site.clone();
        if let Some(p) = points.last() {
            if p.z1 != z1 {
                let (old_prev, new_prev, w2_prev) = prev_w.expect("set with the previous point");
                let old_now = state.log_w(p.z1.coords());
                let new_now = state.log_w(z1.coords());
                transitions.push(Transition {
                    t_before: p.t,
                    t_after: s.t,
                    old_site: p.z1.clone(),
                    new_site: z1.clone(),
                    split_before: (old_prev - new_prev).exp(),
                    split_after: (old_now - new_now).exp(),
                    r1_before: p.r1,
                    r1_after: rep.r1,
                    r2_before: p.r2,
                    r2_after: rep.r2,
                    log_w2_before: w2_prev,
                    log_w2_after: state.log_w(s.top[1].site.coords()),
                });
            }
        }
        // remember the next scan's Z¹ weight at this time for the split
        let next_z1 = scans.get(i + 1).map(|n| n.top[0].site.clone());
        prev_w = Some((
            state.log_w(z1.coords()),
            next_z1.map_or(f64::NAN, |z| state.log_w(z.coords())),
            state.log_w(s.top[1].site.coords()),
        ));
        points.push(TrackPoint {
            t: s.t,
            z1,
            z2: s.top[1].site.clone(),
            argmax: rep.argmax_site.clone(),
            r1: rep.r1,
            r2: rep.r2,
            log_u: rep.log_u,
        });
        reports.push(rep);
    }
    Ok((TwoCitiesLog { points, transitions }, reports))
}

/// Time at which Φ_t(a) = Φ_t(b), by bisection on [lo, hi]; the sign of
/// Φ_t(a) − Φ_t(b) must differ at the two ends.
pub fn crossing_time(field: &PotentialField, a: &[i64], b: &[i64], lo: f64, hi: f64) -> Result<f64> {
    let diff = |t: f64| phi(field, t, a).phi - phi(field, t, b).phi;
    let (mut lo, mut hi) = (lo, hi);
    let (flo, fhi) = (diff(lo), diff(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::invalid("bracket", "Φ_t(a) − Φ_t(b) has the same sign at both ends"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if diff(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
