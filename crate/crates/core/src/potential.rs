//! The random environment ξ: a seeded, lazily evaluated i.i.d. Pareto field
//! on Z^d with P(ξ > x) = x^{-α} for x ≥ 1, together with the scaling
//! functions and constants that govern its extremes.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::lattice::{ball_count, for_each_in_ball, l1_norm, Site};
use crate::rng::SiteHasher;
use crate::topk::{Ranked, TopK};

/// Serializable description of a Pareto field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub seed: u64,
    pub d: usize,
    pub alpha: f64,
}

/// Inverse Pareto CDF: the value with upper tail probability `u`.
#[inline(always)]
pub fn pareto_quantile(u: f64, alpha: f64) -> f64 {
    u.powf(-1.0 / alpha)
}

#[derive(Clone, Debug)]
pub struct ParetoField {
    spec: FieldSpec,
    hasher: SiteHasher,
}

impl ParetoField {
    pub fn new(seed: u64, d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        if !(alpha > d as f64) || !alpha.is_finite() {
            return Err(Error::invalid(
                "alpha",
                format!("need alpha > d = {d}, got {alpha}"),
            ));
        }
        Ok(ParetoField {
            spec: FieldSpec { seed, d, alpha },
            hasher: SiteHasher::new(seed),
        })
    }

    pub fn from_spec(spec: FieldSpec) -> Result<Self> {
        Self::new(spec.seed, spec.d, spec.alpha)
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    /// The uniform variate behind ξ(z); ξ(z) = U(z)^{-1/α}.
    #[inline(always)]
    pub fn uniform(&self, z: &[i64]) -> f64 {
        self.hasher.uniform(z)
    }

    #[inline(always)]
    pub fn xi(&self, z: &[i64]) -> f64 {
        pareto_quantile(self.uniform(z), self.spec.alpha)
    }
}

/// A finite table of values over a constant background. Test device.
#[derive(Clone, Debug)]
pub struct ExplicitField {
    d: usize,
    values: HashMap<Vec<i64>, f64>,
    background: f64,
    support_radius: u64,
}

impl ExplicitField {
    pub fn new(d: usize, background: f64) -> Self {
        assert!(d >= 1);
        ExplicitField {
            d,
            values: HashMap::new(),
            background,
            support_radius: 0,
        }
    }

    pub fn with_value(mut self, z: &[i64], value: f64) -> Self {
        self.set(z, value);
        self
    }

    pub fn set(&mut self, z: &[i64], value: f64) {
        assert_eq!(z.len(), self.d, "site dimension mismatch");
        self.support_radius = self.support_radius.max(l1_norm(z));
        self.values.insert(z.to_vec(), value);
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    /// Largest |z| carrying an explicit value.
    pub fn support_radius(&self) -> u64 {
        self.support_radius
    }

    pub fn xi(&self, z: &[i64]) -> f64 {
        self.values.get(z).copied().unwrap_or(self.background)
    }

    /// Reads a CSV with header `z_1,..,z_d,xi`.
    pub fn from_csv(reader: impl Read, background: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let d = headers.len().checked_sub(1).filter(|&d| d >= 1).ok_or_else(|| {
            Error::invalid("field csv", "expected columns z_1..z_d,xi")
        })?;
        for (i, h) in headers.iter().take(d).enumerate() {
            if h != format!("z_{}", i + 1) {
                return Err(Error::invalid("field csv", format!("unexpected column `{h}`")));
            }
        }
        if &headers[d] != "xi" {
            return Err(Error::invalid("field csv", "last column must be `xi`"));
        }
        let mut field = ExplicitField::new(d, background);
        for rec in rdr.records() {
            let rec = rec?;
            let parse_err = |s: &str| Error::invalid("field csv", format!("bad number `{s}`"));
            let z = (0..d)
                .map(|i| rec[i].trim().parse::<i64>().map_err(|_| parse_err(&rec[i])))
                .collect::<Result<Vec<_>>>()?;
            let v: f64 = rec[d].trim().parse().map_err(|_| parse_err(&rec[d]))?;
            field.set(&z, v);
        }
        Ok(field)
    }
}

/// Upper-tail law of the field beyond the region a scan has covered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailLaw {
    /// i.i.d. Pareto(α): P(ξ > x) = min(1, x^{-α}).
    Pareto { alpha: f64 },
    /// Deterministic: ξ ≤ `sup` outside the ball of radius `support_radius`.
    Bounded { sup: f64, support_radius: u64 },
}

#[derive(Clone, Debug)]
pub enum PotentialField {
    Pareto(ParetoField),
    Explicit(ExplicitField),
    /// ξ + shift, used to check gauge invariance of the solver.
    Shifted { base: Box<PotentialField>, shift: f64 },
}

impl PotentialField {
    pub fn pareto(seed: u64, d: usize, alpha: f64) -> Result<Self> {
        Ok(PotentialField::Pareto(ParetoField::new(seed, d, alpha)?))
    }

    pub fn shifted(self, shift: f64) -> Self {
        PotentialField::Shifted {
            base: Box::new(self),
            shift,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialField::Pareto(p) => p.spec.d,
            PotentialField::Explicit(e) => e.d,
            PotentialField::Shifted { base, .. } => base.dim(),
        }
    }

    #[inline]
    pub fn xi(&self, z: &[i64]) -> f64 {
        match self {
            PotentialField::Pareto(p) => p.xi(z),
            PotentialField::Explicit(e) => e.xi(z),
            PotentialField::Shifted { base, shift } => base.xi(z) + shift,
        }
    }

    pub fn spec(&self) -> Option<FieldSpec> {
        match self {
            PotentialField::Pareto(p) => Some(p.spec),
            _ => None,
        }
    }

    pub fn tail_law(&self) -> Option<TailLaw> {
        match self {
            PotentialField::Pareto(p) => Some(TailLaw::Pareto { alpha: p.spec.alpha }),
            PotentialField::Explicit(e) => Some(TailLaw::Bounded {
                sup: e.background,
                support_radius: e.support_radius,
            }),
            PotentialField::Shifted { base, shift } => match base.tail_law()? {
                TailLaw::Bounded {
                    sup,
                    support_radius,
                } => Some(TailLaw::Bounded {
                    sup: sup + shift,
                    support_radius,
                }),
                TailLaw::Pareto { .. } => None,
            },
        }
    }

    /// Radius the scan must cover before the tail law applies.
    pub fn support_radius(&self) -> u64 {
        match self.tail_law() {
            Some(TailLaw::Bounded { support_radius, .. }) => support_radius,
            _ => 0,
        }
    }

    /// Writes ξ on the ℓ∞ window [-radius, radius]^d as CSV `z_1..z_d,xi`.
    pub fn dump_window(&self, radius: i64, out: impl Write) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=d).map(|i| format!("z_{i}")).collect();
        header.push("xi".into());
        w.write_record(&header)?;
        let mut z = vec![-radius; d];
        loop {
            let mut row: Vec<String> = z.iter().map(|c| c.to_string()).collect();
            row.push(self.xi(&z).to_string());
            w.write_record(&row)?;
            // odometer over the window, last coordinate fastest
            let mut i = d;
            loop {
                if i == 0 {
                    w.flush()?;
                    return Ok(());
                }
                i -= 1;
                if z[i] < radius {
                    z[i] += 1;
                    break;
                }
                z[i] = -radius;
            }
        }
    }
}

/// q = d/(α−d) and θ = 2^d B(α−d, d) / (q^d (d−1)!).
pub fn constants(d: usize, alpha: f64) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    let df = d as f64;
    if !(alpha > df) {
        return Err(Error::invalid(
            "alpha",
            format!("need alpha > d = {d}, got {alpha}"),
        ));
    }
    let q = df / (alpha - df);
    let fact: f64 = (1..d).map(|i| i as f64).product();
    let theta = 2f64.powi(d as i32) * beta(alpha - df, df) / (q.powi(d as i32) * fact);
    Ok((q, theta))
}

/// Constants and tuning exponents of the time-dependent scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingBundle {
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
    pub theta: f64,
    pub beta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub nu: f64,
}

/// The scales evaluated at one time t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalings {
    pub t: f64,
    pub r_t: f64,
    pub a_t: f64,
    pub lambda_t: f64,
    pub f_t: f64,
    pub g_t: f64,
    pub k_t: u64,
    pub m_t: u64,
}

impl ScalingBundle {
    /// Defaults ρ = 0.2, σ = 0.45, ν = 0.1, β = 1 + 1/(α−d) + 0.5.
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        let (q, theta) = constants(d, alpha)?;
        Ok(ScalingBundle {
            d,
            alpha,
            q,
            theta,
            beta: 1.0 + 1.0 / (alpha - d as f64) + 0.5,
            rho: 0.2,
            sigma: 0.45,
            nu: 0.1,
        })
    }

    pub fn with_exponents(mut self, rho: f64, sigma: f64, nu: f64, beta: f64) -> Result<Self> {
        self.rho = rho;
        self.sigma = sigma;
        self.nu = nu;
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d as f64;
        if !(0.0 < self.rho && self.rho < self.sigma && self.sigma < 0.5) {
            return Err(Error::invalid("rho/sigma", "need 0 < rho < sigma < 1/2"));
        }
        if !(self.sigma < 1.0 - self.rho / d) {
            return Err(Error::invalid("sigma", "need sigma < 1 - rho/d"));
        }
        if !(self.nu > 0.0) {
            return Err(Error::invalid("nu", "need nu > 0"));
        }
        if !(self.beta > 1.0 + 1.0 / (self.alpha - d)) {
            return Err(Error::invalid("beta", "need beta > 1 + 1/(alpha - d)"));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Result<Scalings> {
        if !(t > 1.0) {
            return Err(Error::invalid("t", format!("scalings need t > 1, got {t}")));
        }
        let lt = t.ln();
        let base = t / lt;
        let r_t = base.powf(self.q + 1.0);
        let g_t = lt.powf(1.0 / (self.alpha - self.d as f64) + self.nu);
        let rg = (r_t * g_t).floor();
        Ok(Scalings {
            t,
            r_t,
            a_t: base.powf(self.q),
            lambda_t: lt.powf(-self.beta),
            f_t: lt.powf(-1.0 / self.d as f64 - self.nu),
            g_t,
            k_t: rg.powf(self.rho).floor() as u64,
            m_t: rg.powf(self.sigma).floor() as u64,
        })
    }
}

/// The top `m` potential values over the ball {|z| ≤ radius}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStatistics {
    pub radius: u64,
    pub entries: Vec<(Site, f64)>,
}

impl OrderStatistics {
    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.entries.iter().map(|(s, _)| s)
    }
}

pub fn order_statistics(field: &PotentialField, radius: u64, m: usize) -> Result<OrderStatistics> {
    let size = ball_count(field.dim(), radius);
    if m == 0 || m as u128 > size {
        return Err(Error::invalid(
            "m",
            format!("need 1 <= m <= ball size {size}, got {m}"),
        ));
    }
    let mut top = TopK::new(m);
    for_each_in_ball(field.dim(), radius, |z| {
        let v = field.xi(z);
        if top.admits(v, z) {
            top.offer(Ranked {
                score: v,
                site: Site::new(z.to_vec()),
                payload: (),
            });
        }
    });
    Ok(OrderStatistics {
        radius,
        entries: top
            .into_sorted()
            .into_iter()
            .map(|r| (r.site, r.score))
            .collect(),
    })
}

/// The sets F_t and G_t: sites of the k_t − 1 (resp. m_t − 1) largest values
/// of ξ in the ball of radius r_t g_t.
pub fn relevant_sets(
    field: &PotentialField,
    bundle: &ScalingBundle,
    t: f64,
) -> Result<(Vec<Site>, Vec<Site>)> {
    let s = bundle.at(t)?;
    let radius = (s.r_t * s.g_t).floor() as u64;
    let want = (s.m_t.max(s.k_t)).saturating_sub(1) as usize;
    if want == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let stats = order_statistics(field, radius, want)?;
    let f: Vec<Site> = stats
        .sites()
        .take(s.k_t.saturating_sub(1) as usize)
        .cloned()
        .collect();
    let g: Vec<Site> = stats
        .sites()
        .take(s.m_t.saturating_sub(1) as usize)
        .cloned()
        .collect();
    Ok((f, g))
}
