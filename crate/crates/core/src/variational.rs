//! The variational functional
//!
//! ```text
//! Φ_t(z) = [ξ(z) − (|z|/t) log ξ(z) + η(z)/t] · 1{t ξ(z) ≥ |z|}
//! ```
//!
//! whose top maximizers Z_t^{(1)}, Z_t^{(2)}, Z_t^{(3)} predict where the
//! solution concentrates, and a certified search for them over all of Z^d.
//!
//! The search scans balls of growing radius R. Beyond R nothing is known
//! about the field except its law, so the scan stops once the union bound
//!
//! ```text
//! P(∃ |z| > R : Φ_t(z) > M) ≤ Σ_{r>R} #{|z| = r} · P(ξ > ψ_{r/t}(M − (r/t) log d))
//! ```
//!
//! drops below the requested miss probability, with M the current k-th
//! best value. The bound uses {Φ_t(z) ≤ x} = {ξ(z) ≤ ψ_{|z|/t}(x − η(z)/t)}
//! together with η(z) ≤ |z| log d.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ball_count_f64, eta, for_each_in_shell, l1_norm, shell_count, Site};
use crate::potential::{PotentialField, ScalingBundle, TailLaw};
use crate::topk::{Ranked, TopK};

/// Φ_t at one site, with its ingredients.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiValue {
    pub site: Site,
    pub phi: f64,
    pub xi: f64,
    pub eta_over_t: f64,
    pub active: bool,
}

/// Φ_t from its ingredients: potential value, |z|, η(z) and t.
#[inline]
pub fn phi_from_parts(xi: f64, norm: u64, eta: f64, t: f64) -> (f64, bool) {
    let n = norm as f64;
    if t * xi >= n {
        (xi - (n / t) * xi.ln() + eta / t, true)
    } else {
        (0.0, false)
    }
}

pub fn phi(field: &PotentialField, t: f64, z: &[i64]) -> PhiValue {
    let xi = field.xi(z);
    let norm = l1_norm(z);
    let e = eta(z);
    let (phi, active) = phi_from_parts(xi, norm, e, t);
    PhiValue {
        site: Site::new(z.to_vec()),
        phi,
        xi,
        eta_over_t: if active { e / t } else { 0.0 },
        active,
    }
}

/// χ_a(y) = y − a log y.
#[inline]
pub fn chi(a: f64, y: f64) -> f64 {
    if a == 0.0 {
        y
    } else {
        y - a * y.ln()
    }
}

/// ψ_a: inverse of χ_a on [a, ∞), extended by the constant a below
/// a − a log a. For a = 0 it is the identity on [0, ∞).
pub fn psi(a: f64, x: f64) -> Result<f64> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid("a", format!("need a >= 0, got {a}")));
    }
    if x.is_nan() {
        return Err(Error::invalid("x", "NaN"));
    }
    if a == 0.0 {
        if x < 0.0 {
            return Err(Error::PsiDomain { x });
        }
        return Ok(x);
    }
    Ok(psi_positive(a, x))
}

/// ψ_a for a > 0. Safeguarded Newton on the convex function χ_a, iterating
/// from the right of the root; bisection takes over when Newton stalls
/// (near the branch point, where χ_a' vanishes).
fn psi_positive(a: f64, x: f64) -> f64 {
    let floor = a - a * a.ln();
    if x <= floor {
        return a;
    }
    if x == f64::INFINITY {
        return x;
    }
    let mut lo = a;
    let mut hi = (x + a * x.abs().max(a).ln().max(0.0) + a).max(2.0 * a);
    while chi(a, hi) < x {
        lo = hi;
        hi *= 2.0;
    }
    let mut y = hi;
    for _ in 0..200 {
        let f = chi(a, y) - x;
        if f <= 0.0 {
            lo = y;
            if hi - lo <= 1e-15 * hi {
                return y;
            }
            y = 0.5 * (lo + hi);
            continue;
        }
        hi = y;
        let newton = y - f / (1.0 - a / y);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // slow Newton progress means we sit near the double-root regime
        let next = if hi - next < 0.01 * (hi - lo) && hi - lo > 1e-12 * hi {
            0.5 * (lo + hi)
        } else {
            next
        };
        if (y - next).abs() <= 1e-15 * y {
            return next;
        }
        y = next;
        if hi - lo <= 1e-15 * hi {
            return y;
        }
    }
    y
}

/// Ratio between consecutive block ends in the blocked tail summation.
const BLOCK_RATIO: f64 = 1.0 / 256.0;
/// Stop once the analytic remainder is below this fraction of the sum.
const REMAINDER_FRACTION: f64 = 1e-3;
const MAX_BLOCKS: usize = 1_000_000;

/// Union bound on P(some site with |z| > `radius` has Φ_t(z) > `level`).
///
/// For a Pareto tail, shells are summed in blocks [A, B] with B ≈ A(1+1/256),
/// each bounded by (ℓ_B − ℓ_{A−1}) · p(A); this is an upper bound because
/// p(r) = min(1, ψ_{r/t}(M − (r/t) log d)^{−α}) is nonincreasing in r once
/// ψ ≥ d (guaranteed for M ≥ d, or for r ≥ d t). Shells where monotonicity
/// is not guaranteed are summed one by one.
///
/// Remainder past B ≥ e d t: there ψ ≥ a log(a/d) with a = r/t (because
/// ψ − a log(ψ/d) = M > 0 and ψ ≥ a) and #{|z| = r} ≤ 2^d C(r+d−1, d−1),
/// so with L = log(B/(t d)) ≥ 1 and c = 1 + (d−1)/(B+1),
///
/// ```text
/// Σ_{r>B} ≤ 2^d c^{d−1} / (d−1)! · t^α L^{−α} · B^{d−α} / (α − d).
/// ```
///
/// Summation stops when this remainder is below 1e−3 of the partial sum;
/// the returned value includes the remainder, so it is always a valid bound.
pub fn tail_miss_bound(law: TailLaw, d: usize, t: f64, radius: u64, level: f64) -> f64 {
    if !(level > 0.0) {
        return 1.0;
    }
    match law {
        TailLaw::Pareto { alpha } => pareto_tail_bound(alpha, d, t, radius, level),
        TailLaw::Bounded {
            sup,
            support_radius,
        } => bounded_tail_bound(sup, support_radius, d, t, radius, level),
    }
}

fn exceed_threshold(d: usize, t: f64, r: f64, level: f64) -> f64 {
    let a = r / t;
    let y = level - a * (d as f64).ln();
    if a == 0.0 {
        y
    } else {
        psi_positive(a, y)
    }
}

fn pareto_prob(alpha: f64, thr: f64) -> f64 {
    if thr <= 1.0 {
        1.0
    } else {
        thr.powf(-alpha).min(1.0)
    }
}

fn pareto_tail_bound(alpha: f64, d: usize, t: f64, radius: u64, level: f64) -> f64 {
    let df = d as f64;
    let mut sum = 0.0;

    // shells where p(r) might not be monotone are summed exactly
    let mut start = radius + 1;
    if level < df {
        let exact_end = (df * t).ceil() as u64;
        while start <= exact_end {
            let p = pareto_prob(alpha, exceed_threshold(d, t, start as f64, level));
            sum += shell_count(d, start) as f64 * p;
            start += 1;
        }
    }

    let remainder_from = |b: f64| -> Option<f64> {
        let l = (b / (t * df)).ln();
        if l < 1.0 {
            return None;
        }
        let c = 1.0 + (df - 1.0) / (b + 1.0);
        let fact: f64 = (1..d).map(|i| i as f64).product();
        Some(
            2f64.powi(d as i32) * c.powf(df - 1.0) / fact
                * t.powf(alpha)
                * l.powf(-alpha)
                * b.powf(df - alpha)
                / (alpha - df),
        )
    };

    let mut a_end = start as f64 - 1.0;
    for _ in 0..MAX_BLOCKS {
        let a_start = a_end + 1.0;
        let b = (a_start * (1.0 + BLOCK_RATIO)).floor().max(a_start);
        let count = ball_count_f64(d, b) - ball_count_f64(d, a_start - 1.0);
        let p = pareto_prob(alpha, exceed_threshold(d, t, a_start, level));
        sum += count * p;
        a_end = b;
        if let Some(rem) = remainder_from(b) {
            if rem <= REMAINDER_FRACTION * sum {
                return (sum + rem).min(1.0);
            }
        }
        if sum >= 1.0 {
            return 1.0;
        }
    }
    match remainder_from(a_end) {
        Some(rem) => (sum + rem).min(1.0),
        None => 1.0,
    }
}

fn bounded_tail_bound(
    sup: f64,
    support_radius: u64,
    d: usize,
    t: f64,
    radius: u64,
    level: f64,
) -> f64 {
    if radius < support_radius {
        return 1.0;
    }
    // beyond r = sup·t every threshold ψ ≥ r/t ≥ sup
    let last = (sup * t).ceil();
    if !(last.is_finite()) || last > 1e7 {
        return 1.0;
    }
    let mut r = radius + 1;
    while (r as f64) <= last {
        if sup > exceed_threshold(d, t, r as f64, level) {
            return 1.0;
        }
        r += 1;
    }
    0.0
}

/// Parameters of [`top_k_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Required bound on the probability of having missed a better site.
    pub target_eps: f64,
    /// First scan radius; default max(8, ⌈r_t⌉).
    pub initial_radius: Option<u64>,
    /// Hard cap on the scan radius.
    pub radius_cap: u64,
    /// Radius growth factor between rounds.
    pub growth: f64,
    /// Hard cap on the number of sites in the scanned ball.
    pub max_sites: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            target_eps: 1e-6,
            initial_radius: None,
            radius_cap: 1 << 30,
            growth: 1.5,
            max_sites: 1_000_000_000,
        }
    }
}

/// Top-k maximizers of Φ_t with the certificate of the scan.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiScanResult {
    pub t: f64,
    pub k: usize,
    pub scan_radius: u64,
    pub miss_probability_bound: f64,
    pub top: Vec<PhiValue>,
}

#[derive(Serialize, Deserialize)]
struct ScanEntryJson {
    z: Site,
    phi: f64,
    xi: f64,
}

#[derive(Serialize, Deserialize)]
struct ScanJson {
    t: f64,
    k: usize,
    scan_radius: u64,
    miss_bound: f64,
    top: Vec<ScanEntryJson>,
}

impl PhiScanResult {
    /// JSON form `{t, k, scan_radius, miss_bound, top: [{z, phi, xi}]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ScanJson {
            t: self.t,
            k: self.k,
            scan_radius: self.scan_radius,
            miss_bound: self.miss_probability_bound,
            top: self
                .top
                .iter()
                .map(|v| ScanEntryJson {
                    z: v.site.clone(),
                    phi: v.phi,
                    xi: v.xi,
                })
                .collect(),
        })
        .expect("plain data serializes")
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.top[i].site
    }
}

enum Screen {
    All,
    Uniform(f64),
    Xi(f64),
}

impl Screen {
    #[inline(always)]
    fn passes(&self, field: &PotentialField, z: &[i64]) -> bool {
        match self {
            Screen::All => true,
            Screen::Uniform(umax) => match field {
                PotentialField::Pareto(p) => p.uniform(z) <= *umax,
                _ => true,
            },
            Screen::Xi(min) => field.xi(z) >= *min,
        }
    }
}

/// Cheap prefilter for shells r0..=r1: a site can beat `level` only if
/// ξ(z) ≥ ψ_{r0/t}(level − (r1/t) log d). Valid because ψ_a(y) increases in
/// y, and in a as long as ψ ≥ 1; below 1 nothing is screened.
fn screen_for_block(field: &PotentialField, t: f64, r0: u64, r1: u64, level: Option<f64>) -> Screen {
    let Some(m) = level.filter(|m| *m > 0.0) else {
        return Screen::All;
    };
    let d = field.dim() as f64;
    let a0 = r0 as f64 / t;
    let y = m - (r1 as f64 / t) * d.ln();
    let thr = if a0 == 0.0 {
        y
    } else {
        psi_positive(a0, y)
    };
    if !(thr >= 1.0) {
        return Screen::All;
    }
    let thr = thr * (1.0 - 1e-9);
    match field {
        PotentialField::Pareto(p) => Screen::Uniform(thr.powf(-p.alpha()) * (1.0 + 1e-9)),
        _ => Screen::Xi(thr),
    }
}

fn scan_block(
    field: &PotentialField,
    t: f64,
    k: usize,
    r0: u64,
    r1: u64,
    level: Option<f64>,
) -> TopK<PhiValue> {
    let mut local = TopK::new(k);
    let d = field.dim();
    let mut screen = screen_for_block(field, t, r0, r1, level);
    let mut screened_at = level;
    for r in r0..=r1 {
        for_each_in_shell(d, r, |z| {
            if !screen.passes(field, z) {
                return;
            }
            let v = phi(field, t, z);
            if level.is_some_and(|m| v.phi < m) || !local.admits(v.phi, z) {
                return;
            }
            local.offer(Ranked {
                score: v.phi,
                site: v.site.clone(),
                payload: v,
            });
        });
        // tighten the prefilter as the local k-th best improves
        let now = match (level, local.threshold()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        if now != screened_at && r < r1 {
            screen = screen_for_block(field, t, r + 1, r1, now);
            screened_at = now;
        }
    }
    local
}

fn shell_blocks(from: u64, to: u64) -> Vec<(u64, u64)> {
    let mut blocks = Vec::new();
    let mut r0 = from;
    while r0 <= to {
        let r1 = (r0 + r0 / 64).min(to);
        blocks.push((r0, r1));
        r0 = r1 + 1;
    }
    blocks
}

fn default_initial_radius(field: &PotentialField, t: f64) -> u64 {
    let from_scale = match field.tail_law() {
        Some(TailLaw::Pareto { alpha }) if t > std::f64::consts::E => {
            ScalingBundle::new(field.dim(), alpha)
                .and_then(|b| b.at(t))
                .map(|s| s.r_t.ceil() as u64)
                .unwrap_or(8)
        }
        _ => 8,
    };
    from_scale.max(8)
}

/// Certified top-k search for the maximizers of Φ_t over Z^d.
pub fn top_k_scan(field: &PotentialField, t: f64, k: usize, cfg: &ScanConfig) -> Result<PhiScanResult> {
    if !(t > 1.0) {
        return Err(Error::invalid("t", format!("scan needs t > 1, got {t}")));
    }
    if k == 0 {
        return Err(Error::invalid("k", "need k >= 1"));
    }
    if !(cfg.growth > 1.0) {
        return Err(Error::invalid("growth", "need growth > 1"));
    }
    let law = field.tail_law().ok_or(Error::UncertifiableField)?;
    let d = field.dim();

    let site_cap = |r: u64| ball_count_f64(d, r as f64) <= cfg.max_sites as f64;
    let mut radius_cap = cfg.radius_cap;
    if !site_cap(radius_cap) {
        let (mut lo, mut hi) = (0u64, radius_cap);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if site_cap(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        radius_cap = lo;
    }

    let mut top: TopK<PhiValue> = TopK::new(k);
    let mut radius = cfg
        .initial_radius
        .unwrap_or_else(|| default_initial_radius(field, t))
        .max(field.support_radius())
        .min(radius_cap);
    let mut next_shell = 0u64;
    loop {
        let level = top.threshold();
        let partials: Vec<TopK<PhiValue>> = shell_blocks(next_shell, radius)
            .into_par_iter()
            .map(|(r0, r1)| scan_block(field, t, k, r0, r1, level))
            .collect();
        for p in partials {
            top.merge(p);
        }
        next_shell = radius + 1;

        let bound = match top.threshold() {
            Some(m) => tail_miss_bound(law, d, t, radius, m),
            None => 1.0,
        };
        let done = bound <= cfg.target_eps;
        if done || radius >= radius_cap {
            let result = PhiScanResult {
                t,
                k,
                scan_radius: radius,
                miss_probability_bound: bound,
                top: top.clone().into_sorted().into_iter().map(|r| r.payload).collect(),
            };
            if done {
                return Ok(result);
            }
            return Err(Error::ScanBudgetExceeded {
                cap: radius_cap,
                bound,
                target: cfg.target_eps,
                partial: Box::new(result),
            });
        }
        radius = ((radius as f64 * cfg.growth).ceil() as u64)
            .max(radius + 1)
            .min(cfg.radius_cap)
            .min(radius_cap);
    }
}

/// Is `z` in Γ^{(i)} around `center`: |z − Z| + min(|z|, |Z|) < factor·|Z|(1 + t^{−δ/2})?
/// `factor` is 1 for Γ_t^{(i)} and the prefactor 6 of the wider set uses
/// `widen = 6`.
pub fn in_gamma(z: &Site, center: &Site, t: f64, delta: f64, widen: f64) -> bool {
    let zn = center.norm() as f64;
    let lhs = z.distance(center) as f64 + (z.norm() as f64).min(zn);
    lhs < zn * (1.0 + widen * t.powf(-delta / 2.0))
}

/// One maximizer checked against the almost-sure bounds that hold
/// eventually for the top three maximizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizerBounds {
    pub phi_above_scale: bool,
    pub xi_above_scale: bool,
    pub active: bool,
    pub radius_in_window: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapDiagnostics {
    pub t: f64,
    /// (Φ¹ − Φ³)/(a_t λ_t)
    pub gap13_ratio: f64,
    /// (Φ¹ − Φ²)/(a_t λ_t)
    pub gap12_ratio: f64,
    /// |Z^{(i)}|/r_t
    pub radius_ratio: [f64; 3],
    /// Φ^{(i)}/a_t
    pub phi_ratio: [f64; 3],
    /// ξ(Z^{(i)})/a_t
    pub xi_ratio: [f64; 3],
    pub bounds: [MaximizerBounds; 3],
    /// Z² ∈ Γ_t^{(1)} for the configured δ
    pub z2_in_gamma1: bool,
}

impl GapDiagnostics {
    pub fn gap13_exceeds_scale(&self) -> bool {
        self.gap13_ratio >= 1.0
    }
}

/// Tolerances of the eventual bounds reported by [`gap_diagnostics`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// ε in the log-corrections of the maximizer bounds.
    pub epsilon: f64,
    /// δ of the Γ-neighbourhoods.
    pub delta: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            epsilon: 0.1,
            delta: 0.5,
        }
    }
}

pub fn gap_diagnostics(
    scan: &PhiScanResult,
    bundle: &ScalingBundle,
    cfg: &DiagnosticsConfig,
) -> Result<GapDiagnostics> {
    if scan.top.len() < 3 {
        return Err(Error::invalid("scan", "gap diagnostics need k >= 3"));
    }
    let s = bundle.at(scan.t)?;
    let scale = s.a_t * s.lambda_t;
    let lt = scan.t.ln();
    let eps = cfg.epsilon;
    let lower = s.a_t * lt.powf(-eps);
    let rmin = s.r_t * lt.powf(-1.0 / bundle.d as f64 - eps);
    let rmax = s.r_t * lt.powf(1.0 / (bundle.alpha - bundle.d as f64) + eps);
    let top = &scan.top;
    let per = |f: &dyn Fn(&PhiValue) -> f64| [f(&top[0]), f(&top[1]), f(&top[2])];
    let bound = |v: &PhiValue| {
        let n = v.site.norm() as f64;
        MaximizerBounds {
            phi_above_scale: v.phi > lower,
            xi_above_scale: v.xi > lower,
            active: scan.t * v.xi > n,
            radius_in_window: rmin < n && n < rmax,
        }
    };
    Ok(GapDiagnostics {
        t: scan.t,
        gap13_ratio: (top[0].phi - top[2].phi) / scale,
        gap12_ratio: (top[0].phi - top[1].phi) / scale,
        radius_ratio: per(&|v| v.site.norm() as f64 / s.r_t),
        phi_ratio: per(&|v| v.phi / s.a_t),
        xi_ratio: per(&|v| v.xi / s.a_t),
        bounds: [bound(&top[0]), bound(&top[1]), bound(&top[2])],
        z2_in_gamma1: in_gamma(&top[1].site, &top[0].site, scan.t, cfg.delta, 1.0),
    })
}
