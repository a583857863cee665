//! Principal Dirichlet eigenpair of the Anderson Hamiltonian Δ + ξ on a
//! finite set A, the gap g_A of the potential on A, and the decay bound
//! v_A(z) ≤ (2d/g_A)^{|z − Z_A|} of the eigenfunction away from the peak.
//!
//! The operator lives on the connected component A* of A containing the
//! argmax Z_A of ξ. Shifted by +2d it is nonnegative and irreducible on
//! A*, so plain power iteration converges to the Perron pair.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{for_each_in_ball, Site};
use crate::potential::PotentialField;

/// A nonempty finite set of sites, duplicates removed, in first-seen order.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSet {
    sites: Vec<Site>,
}

impl FiniteSet {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        let Some(first) = sites.first() else {
            return Err(Error::invalid("A", "the set must be nonempty"));
        };
        let d = first.dim();
        if sites.iter().any(|s| s.dim() != d) {
            return Err(Error::invalid("A", "sites of different dimensions"));
        }
        let mut seen = HashMap::with_capacity(sites.len());
        let sites = sites
            .into_iter()
            .filter(|s| seen.insert(s.clone(), ()).is_none())
            .collect();
        Ok(FiniteSet { sites })
    }

    /// The ℓ1 ball {|z − center| ≤ r}.
    pub fn ball(center: &Site, r: u64) -> Self {
        let mut sites = Vec::new();
        for_each_in_ball(center.dim(), r, |z| {
            let c = z.iter().zip(center.coords()).map(|(a, b)| a + b).collect();
            sites.push(Site::new(c));
        });
        FiniteSet { sites }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    /// Index of the argmax of ξ on the set; ties go to the smaller site.
    fn peak(&self, field: &PotentialField) -> usize {
        let mut best = 0;
        let mut best_xi = field.xi(self.sites[0].coords());
        for (i, s) in self.sites.iter().enumerate().skip(1) {
            let x = field.xi(s.coords());
            if x > best_xi || (x == best_xi && *s < self.sites[best]) {
                best = i;
                best_xi = x;
            }
        }
        best
    }

    /// Indices of the connected component containing `start`, sorted.
    fn component(&self, start: usize) -> Vec<usize> {
        let index: HashMap<&Site, usize> = self.sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut inside = vec![false; self.sites.len()];
        inside[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut out = Vec::new();
        while let Some(i) = queue.pop_front() {
            out.push(i);
            for nb in self.sites[i].neighbors() {
                if let Some(&j) = index.get(&nb) {
                    if !inside[j] {
                        inside[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Stop once |(Δ+ξ)v − γv|(z) ≤ tol·max(|γ|, 1)·v(z) at every site
    /// where v(z) is a normal float.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            tol: 1e-11,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub d: usize,
    pub gamma: f64,
    pub peak: Site,
    pub peak_xi: f64,
    /// g_A; `None` for a single site.
    pub gap: Option<f64>,
    /// ‖(Δ+ξ)v − γv‖∞ with v(Z_A) = 1.
    pub residual: f64,
    pub iterations: usize,
    /// The sites of A with v, zero off A*.
    pub sites: Vec<Site>,
    pub v: Vec<f64>,
}

#[derive(Serialize)]
struct SiteValue<'a> {
    z: &'a Site,
    v: f64,
}

#[derive(Serialize)]
struct SpectralJson<'a> {
    gamma: f64,
    gap: Option<f64>,
    residual: f64,
    sites: Vec<SiteValue<'a>>,
}

impl SpectralResult {
    pub fn to_json(&self) -> serde_json::Value {
        let doc = SpectralJson {
            gamma: self.gamma,
            gap: self.gap,
            residual: self.residual,
            sites: self.sites.iter().zip(&self.v).map(|(z, &v)| SiteValue { z, v }).collect(),
        };
        serde_json::to_value(doc).expect("spectral result serializes")
    }
}

/// g_A = ξ(Z_A) − max_{A∖{Z_A}} ξ.
pub fn gap(field: &PotentialField, set: &FiniteSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::GapNeedsTwoSites);
    }
    let p = set.peak(field);
    let top = field.xi(set.sites[p].coords());
    let second = set
        .sites
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != p)
        .map(|(_, s)| field.xi(s.coords()))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(top - second)
}

/// Power iteration for the principal eigenpair of Δ + ξ on A*.
pub fn principal_eigenpair(field: &PotentialField, set: &FiniteSet, cfg: &SpectralConfig) -> Result<SpectralResult> {
    let d = set.dim();
    if field.dim() != d {
        return Err(Error::invalid("A", "dimension differs from the field"));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("tol", "need tol > 0"));
    }
    let p = set.peak(field);
    let comp = set.component(p);
    let local: HashMap<&Site, usize> = comp.iter().enumerate().map(|(k, &i)| (&set.sites[i], k)).collect();
    let n = comp.len();
    let xi: Vec<f64> = comp.iter().map(|&i| field.xi(set.sites[i].coords())).collect();
    let mut adj_start = Vec::with_capacity(n + 1);
    let mut adj = Vec::new();
    for &i in &comp {
        adj_start.push(adj.len());
        adj.extend(set.sites[i].neighbors().filter_map(|nb| local.get(&nb).copied()));
    }
    adj_start.push(adj.len());
    let peak_local = local[&set.sites[p]];
    let two_d = 2.0 * d as f64;

    // y = (Δ + ξ)v on A* with zero boundary values
    let apply = |v: &[f64], y: &mut [f64]| {
        for k in 0..n {
            let nb: f64 = adj[adj_start[k]..adj_start[k + 1]].iter().map(|&j| v[j]).sum();
            y[k] = (xi[k] - two_d) * v[k] + nb;
        }
    };

    let mut v = vec![0.0; n];
    // start from the single-peak profile, already close to the answer
    for (k, &i) in comp.iter().enumerate() {
        let dist = set.sites[i].distance(&set.sites[p]) as i32;
        v[k] = (1.0 + two_d).powi(-dist);
    }
    let mut y = vec![0.0; n];
    let mut gamma = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        apply(&v, &mut y);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let vy: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        gamma = vy / vv;
        // v has max norm 1, so this is relative to ‖v‖∞
        residual = y.iter().zip(&v).map(|(a, b)| (a - gamma * b).abs()).fold(0.0, f64::max);
        // the decay bounds are pointwise, so the tail has to be converged
        // relative to its own size, not just to the peak
        let pointwise = y
            .iter()
            .zip(&v)
            .filter(|(_, &b)| b >= f64::MIN_POSITIVE)
            .map(|(a, b)| (a - gamma * b).abs() / b)
            .fold(0.0, f64::max);
        if pointwise <= cfg.tol * gamma.abs().max(1.0) {
            break;
        }
        // v ← (H + 2d)v in the max norm; normalizing at the peak instead
        // loses precision when v lives away from it (small gaps)
        for (a, b) in v.iter_mut().zip(&y) {
            *a = b + two_d * *a;
        }
        let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v.iter_mut().for_each(|a| *a /= norm);
        iterations += 1;
    }
    if iterations == cfg.max_iterations {
        return Err(Error::NoConvergence { iterations, residual });
    }

    // report v with v(Z_A) = 1
    let at_peak = v[peak_local];
    residual /= at_peak;
    let mut full = vec![0.0; set.len()];
    for (k, &i) in comp.iter().enumerate() {
        full[i] = (v[k] / at_peak).max(0.0);
    }
    Ok(SpectralResult {
        d,
        gamma,
        peak: set.sites[p].clone(),
        peak_xi: xi[peak_local],
        gap: if set.len() >= 2 { Some(gap(field, set)?) } else { None },
        residual,
        iterations,
        sites: set.sites.clone(),
        v: full,
    })
}

/// φ(x) = (Σ_z (2d/x)^{2|z|})·(Σ_{z≠0} (2d/x)^{|z|}) via
/// Σ_{z∈Z^d} s^{|z|} = ((1+s)/(1−s))^d.
pub fn varphi(d: usize, x: f64) -> Result<f64> {
    let two_d = 2.0 * d as f64;
    if d == 0 || !(x > two_d) {
        return Err(Error::invalid("x", format!("need x > 2d = {two_d}, got {x}")));
    }
    let s = two_d / x;
    let lattice_sum = |s: f64| ((1.0 + s) / (1.0 - s)).powi(d as i32);
    Ok(lattice_sum(s * s) * (lattice_sum(s) - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub gap: Option<f64>,
    /// max over z ≠ Z_A of v(z)/(2d/g_A)^{|z−Z_A|}; certified when ≤ 1.
    pub worst_pointwise_ratio: f64,
    pub pointwise_violations: usize,
    /// ‖v‖₂²·Σ_{z≠Z_A} v(z)
    pub mass_term: f64,
    pub phi_bound: Option<f64>,
}

impl DecayCertificate {
    pub fn holds(&self) -> bool {
        self.pointwise_violations == 0 && self.phi_bound.is_none_or(|b| self.mass_term <= b)
    }

    pub fn phi_margin(&self) -> Option<f64> {
        self.phi_bound.map(|b| b - self.mass_term)
    }
}

/// Checks the pointwise decay bound and ‖v‖₂²·Σ_{z≠Z_A} v(z) ≤ φ(g_A).
pub fn decay_certificate(result: &SpectralResult) -> Result<DecayCertificate> {
    let Some(g) = result.gap else {
        return Ok(DecayCertificate {
            gap: None,
            worst_pointwise_ratio: 0.0,
            pointwise_violations: 0,
            mass_term: 0.0,
            phi_bound: None,
        });
    };
    let two_d = 2.0 * result.d as f64;
    if g <= two_d {
        return Err(Error::GapTooSmall { gap: g, two_d });
    }
    let base = two_d / g;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let mut norm2 = 0.0;
    let mut off_peak = 0.0;
    for (z, &v) in result.sites.iter().zip(&result.v) {
        norm2 += v * v;
        if *z == result.peak {
            continue;
        }
        off_peak += v;
        let bound = base.powi(z.distance(&result.peak) as i32);
        let ratio = if bound > 0.0 { v / bound } else if v > 0.0 { f64::INFINITY } else { 0.0 };
        worst = worst.max(ratio);
        // a few ulps of slack for the converged iterate
        if v > bound * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    Ok(DecayCertificate {
        gap: Some(g),
        worst_pointwise_ratio: worst,
        pointwise_violations: violations,
        mass_term: norm2 * off_peak,
        phi_bound: Some(varphi(result.d, g)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::ExplicitField;

    fn explicit(d: usize, values: &[(&[i64], f64)]) -> PotentialField {
        let mut f = ExplicitField::new(d, 0.0);
        for (z, v) in values {
            f.set(z, *v);
        }
        PotentialField::Explicit(f)
    }

    fn set(sites: &[&[i64]]) -> FiniteSet {
        FiniteSet::new(sites.iter().map(|s| Site::new(s.to_vec())).collect()).unwrap()
    }

    #[test]
    fn single_site() {
        let f = explicit(2, &[(&[0, 0], 7.0)]);
        let r = principal_eigenpair(&f, &set(&[&[0, 0]]), &SpectralConfig::default()).unwrap();
        assert!((r.gamma - 3.0).abs() < 1e-12);
        assert_eq!(r.v, vec![1.0]);
        assert!(decay_certificate(&r).unwrap().holds());
        assert!(gap(&f, &set(&[&[0, 0]])).is_err());
    }

    #[test]
    fn two_site_closed_form() {
        let c = 20.0;
        let f = explicit(1, &[(&[0], c)]);
        let r = principal_eigenpair(&f, &set(&[&[0], &[1]]), &SpectralConfig::default()).unwrap();
        let gamma = (c - 4.0 + (c * c + 4.0).sqrt()) / 2.0;
        assert!((r.gamma - gamma).abs() < 1e-9 * gamma);
        assert!((r.v[1] - 1.0 / (gamma + 2.0)).abs() < 1e-9);
        let cert = decay_certificate(&r).unwrap();
        assert!(cert.holds());
        assert!(cert.phi_margin().unwrap() > 0.0);
    }

    #[test]
    fn disconnected_part_is_zero() {
        let f = explicit(1, &[(&[0], 10.0), (&[5], 3.0)]);
        let r = principal_eigenpair(&f, &set(&[&[0], &[1], &[5]]), &SpectralConfig::default()).unwrap();
        assert_eq!(r.v[2], 0.0);
        assert!(r.v[1] > 0.0);
        assert_eq!(gap(&f, &set(&[&[0], &[1], &[5]])).unwrap(), 7.0);
    }

    #[test]
    fn varphi_values() {
        assert_eq!(varphi(1, 4.0).unwrap(), 10.0 / 3.0);
        assert!(varphi(1, 2.0).is_err());
        for d in 1..=3 {
            assert!(varphi(d, 1e6).unwrap() < 1e-4);
        }
    }

    #[test]
    fn json_shape() {
        let f = explicit(1, &[(&[0], 5.0)]);
        let r = principal_eigenpair(&f, &set(&[&[0], &[1]]), &SpectralConfig::default()).unwrap();
        let j = r.to_json();
        assert!(j["gamma"].is_f64());
        assert_eq!(j["gap"], 5.0);
        assert_eq!(j["sites"][1]["z"], serde_json::json!([1]));
    }
}
