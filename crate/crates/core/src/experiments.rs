//! Ensembles over seeds and times, compared against the limit laws.
//!
//! Every experiment writes `records.csv`, `summary.json` and
//! `manifest.json` (resolved config plus SHA-256 of each artifact) into its
//! output directory. Records are sorted by (t, seed) and computed in a
//! rayon pool, so their bytes do not depend on the worker count or on the
//! order in which seeds are listed.
//!
//! CSV columns (d-vectors expand to `_1..d`):
//!
//! - limit law: `seed, t, z1_scaled_*, z2_scaled_*, phi1_scaled,
//!   phi2_scaled, miss_bound`
//! - localization: `seed, t, logU, r1, r2, argmax_in_top2, gap13_ratio,
//!   gap12_ratio, boundary_frac, phi1, sandwich`
//! - two cities: `seed, t, z1_*, z2_*, argmax_*, r1, r2, logU`, plus
//!   `transitions.csv` with `seed, t_before, t_after, old_*, new_*,
//!   split_before, split_after, r1_before, r1_after, r2_before, r2_after,
//!   log_w2_before, log_w2_after, shares_mass`

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::laws::LimitLaw;
use crate::potential::PotentialField;
use crate::solver::{default_box_radius, track_scans, TwoCitiesLog};
use crate::stats::{ks_distance, quantile};
use crate::variational::{gap_diagnostics, top_k_scan, PhiScanResult};

pub const RECORDS: &str = "records.csv";
pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";
pub const TRANSITIONS: &str = "transitions.csv";

/// Bracket for (1/t)·log U(t) − Φ_t(Z¹): [−2d − 1, 1].
pub fn sandwich_bracket(d: usize) -> (f64, f64) {
    (-2.0 * d as f64 - 1.0, 1.0)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Option<Self> {
        let q = |l| quantile(xs, l).ok();
        Some(Quantiles {
            q10: q(0.1)?,
            q25: q(0.25)?,
            q50: q(0.5)?,
            q75: q(0.75)?,
            q90: q(0.9)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub t: Option<f64>,
    pub error: String,
}

/// Shortest round-trip text for a float, in exponent form at extreme
/// magnitudes so underflowing ratios stay readable.
fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-5..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn push_site(row: &mut Vec<String>, z: &[f64]) {
    row.extend(z.iter().map(|x| num(*x)));
}

fn site_header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

fn csv_bytes(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn coords_f64(z: &Site) -> Vec<f64> {
    z.coords().iter().map(|&c| c as f64).collect()
}

// ---------------------------------------------------------------- limit law

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawRecord {
    pub seed: u64,
    pub t: f64,
    pub z1_scaled: Vec<f64>,
    pub z2_scaled: Vec<f64>,
    pub phi1_scaled: f64,
    pub phi2_scaled: f64,
    pub miss_bound: f64,
}

impl LimitLawRecord {
    /// |Z¹|/r_t in the ℓ1 norm.
    pub fn radius1(&self) -> f64 {
        self.z1_scaled.iter().map(|x| x.abs()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawAggregate {
    pub t: f64,
    pub n: usize,
    pub r_t: f64,
    pub a_t: f64,
    /// KS distance of Φ¹/a_t against P(Y ≤ y) = exp(−θ y^{d−α}).
    pub ks_phi: Option<f64>,
    /// KS distance of |Z¹|/r_t against the radial law of X¹.
    pub ks_radius: Option<f64>,
    pub phi1_scaled: Option<Quantiles>,
    pub radius1: Option<Quantiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawSummary {
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
    pub theta: f64,
    /// ∫ p¹ over R^d by quadrature.
    pub x1_total_mass: f64,
    pub per_t: Vec<LimitLawAggregate>,
    pub ks_phi_decreasing: bool,
    pub ks_radius_decreasing: bool,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug)]
pub struct LimitLawRun {
    pub d: usize,
    pub records: Vec<LimitLawRecord>,
    pub summary: LimitLawSummary,
}

fn strictly_decreasing(xs: &[Option<f64>]) -> bool {
    xs.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a))
}

/// Certified top-k scans for every (seed, t), scaled by r_t and a_t and
/// compared with the limit laws. Needs no solver run.
pub fn limit_law_experiment(cfg: &ExperimentConfig) -> Result<LimitLawRun> {
    cfg.validate()?;
    let k = cfg.k.max(2);
    let bundle = cfg.bundle()?;
    let law = LimitLaw::new(cfg.d, cfg.alpha)?;
    let scan_cfg = cfg.scan_config();
    let mut seeds = cfg.seed_list();
    seeds.sort_unstable();
    let jobs: Vec<(f64, u64)> = cfg
        .t_grid
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let outcomes: Vec<std::result::Result<LimitLawRecord, Failure>> = with_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|&(t, seed)| {
                let fail = |e: Error| Failure {
                    seed,
                    t: Some(t),
                    error: e.to_string(),
                };
                let field = PotentialField::pareto(seed, cfg.d, cfg.alpha).map_err(fail)?;
                let s = bundle.at(t).map_err(fail)?;
                let scan = top_k_scan(&field, t, k, &scan_cfg).map_err(fail)?;
                let scaled = |i: usize| -> Vec<f64> { coords_f64(scan.site(i)).iter().map(|c| c / s.r_t).collect() };
                Ok(LimitLawRecord {
                    seed,
                    t,
                    z1_scaled: scaled(0),
                    z2_scaled: scaled(1),
                    phi1_scaled: scan.top[0].phi / s.a_t,
                    phi2_scaled: scan.top[1].phi / s.a_t,
                    miss_bound: scan.miss_probability_bound,
                })
            })
            .collect()
    })?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }

    let mut per_t = Vec::new();
    for &t in &cfg.t_grid {
        let s = bundle.at(t)?;
        let here: Vec<&LimitLawRecord> = records.iter().filter(|r| r.t == t).collect();
        let phis: Vec<f64> = here.iter().map(|r| r.phi1_scaled).collect();
        let radii: Vec<f64> = here.iter().map(|r| r.radius1()).collect();
        per_t.push(LimitLawAggregate {
            t,
            n: here.len(),
            r_t: s.r_t,
            a_t: s.a_t,
            ks_phi: ks_distance(&phis, |y| if y > 0.0 { law.y_cdf(y).unwrap_or(0.0) } else { 0.0 }).ok(),
            ks_radius: ks_distance(&radii, |r| law.radial_cdf(r)).ok(),
            phi1_scaled: Quantiles::of(&phis),
            radius1: Quantiles::of(&radii),
        });
    }
    let ks_phi: Vec<Option<f64>> = per_t.iter().map(|a| a.ks_phi).collect();
    let ks_radius: Vec<Option<f64>> = per_t.iter().map(|a| a.ks_radius).collect();
    let summary = LimitLawSummary {
        d: cfg.d,
        alpha: cfg.alpha,
        q: law.q,
        theta: law.theta,
        x1_total_mass: law.x1_total_mass(),
        per_t,
        ks_phi_decreasing: strictly_decreasing(&ks_phi),
        ks_radius_decreasing: strictly_decreasing(&ks_radius),
        failures,
    };
    Ok(LimitLawRun {
        d: cfg.d,
        records,
        summary,
    })
}

impl LimitLawRun {
    pub fn records_csv(&self) -> Result<Vec<u8>> {
        let d = self.d;
        let mut header = vec!["seed".to_string(), "t".to_string()];
        header.extend(site_header("z1_scaled", d));
        header.extend(site_header("z2_scaled", d));
        header.extend(["phi1_scaled", "phi2_scaled", "miss_bound"].map(String::from));
        let rows = self.records.iter().map(|r| {
            let mut row = vec![r.seed.to_string(), num(r.t)];
            push_site(&mut row, &r.z1_scaled);
            push_site(&mut row, &r.z2_scaled);
            row.extend([r.phi1_scaled, r.phi2_scaled, r.miss_bound].map(num));
            row
        });
        csv_bytes(header, rows)
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        let files = vec![
            (RECORDS, self.records_csv()?),
            (SUMMARY, serde_json::to_vec_pretty(&self.summary)?),
        ];
        write_with_manifest(dir, "experiment limit-law", cfg, files)
    }
}

// ------------------------------------------------ localization, two cities

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub seed: u64,
    pub t: f64,
    pub log_u: f64,
    pub r1: f64,
    pub r2: f64,
    pub argmax_in_top2: bool,
    pub gap13_ratio: f64,
    pub gap12_ratio: f64,
    pub boundary_frac: f64,
    pub phi1: f64,
    /// (1/t)·log U(t) − Φ_t(Z¹)
    pub sandwich: f64,
}

/// The solver pass of one seed along the whole t-grid.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<LocalizationRecord>,
    pub track: TwoCitiesLog,
}

/// Solver runs of all seeds; both the localization and the two-cities
/// outputs are views of it.
#[derive(Clone, Debug)]
pub struct SolverEnsemble {
    pub d: usize,
    pub t_grid: Vec<f64>,
    pub runs: Vec<SeedRun>,
    pub failures: Vec<Failure>,
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let field = PotentialField::pareto(seed, cfg.d, cfg.alpha)?;
    let bundle = cfg.bundle()?;
    let scan_cfg = cfg.scan_config();
    let k = cfg.k.max(3);
    let scans: Vec<PhiScanResult> = cfg
        .t_grid
        .iter()
        .map(|&t| top_k_scan(&field, t, k, &scan_cfg))
        .collect::<Result<_>>()?;
    let t_last = *cfg.t_grid.last().expect("validated nonempty");
    let radius = cfg.box_radius.unwrap_or_else(|| default_box_radius(&bundle, t_last));
    let (track, reports) = track_scans(&field, &scans, &cfg.solver_config(), radius)?;
    let diag_cfg = cfg.diagnostics_config();
    let records = scans
        .iter()
        .zip(&reports)
        .map(|(scan, rep)| {
            let g = gap_diagnostics(scan, &bundle, &diag_cfg)?;
            let phi1 = scan.top[0].phi;
            Ok(LocalizationRecord {
                seed,
                t: scan.t,
                log_u: rep.log_u,
                r1: rep.r1,
                r2: rep.r2,
                argmax_in_top2: rep.argmax_in_top2,
                gap13_ratio: g.gap13_ratio,
                gap12_ratio: g.gap12_ratio,
                boundary_frac: rep.boundary_mass_fraction,
                phi1,
                sandwich: rep.log_u / scan.t - phi1,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeedRun { seed, records, track })
}

/// Solves every seed along the t-grid, isolating failures per seed.
pub fn solver_ensemble(cfg: &ExperimentConfig) -> Result<SolverEnsemble> {
    cfg.validate()?;
    let mut seeds = cfg.seed_list();
    seeds.sort_unstable();
    let outcomes: Vec<(u64, Result<SeedRun>)> =
        with_pool(cfg.workers, || seeds.par_iter().map(|&s| (s, run_seed(cfg, s))).collect())?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, o) in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(Failure {
                seed,
                t: None,
                error: e.to_string(),
            }),
        }
    }
    Ok(SolverEnsemble {
        d: cfg.d,
        t_grid: cfg.t_grid.clone(),
        runs,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationAggregate {
    pub t: f64,
    pub n: usize,
    pub r1: Option<Quantiles>,
    pub r2: Option<Quantiles>,
    pub frac_argmax_in_top2: f64,
    /// Fraction of runs with Φ¹ − Φ³ ≥ a_t λ_t.
    pub frac_gap13_exceeds: f64,
    pub sandwich_min: f64,
    pub sandwich_max: f64,
    pub sandwich_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub per_t: Vec<LocalizationAggregate>,
    pub sandwich_bracket: (f64, f64),
    pub sandwich_violations: usize,
    pub median_r2_nondecreasing: bool,
    pub median_r1_last_exceeds_first: bool,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoCitiesAggregate {
    pub t: f64,
    pub n: usize,
    pub median_r1: Option<f64>,
    pub median_r2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoCitiesSummary {
    pub per_t: Vec<TwoCitiesAggregate>,
    pub median_r2_nondecreasing: bool,
    pub median_r2_last_exceeds_first: bool,
    pub transitions: usize,
    /// Transitions with r2 > r1 at both bracketing times.
    pub transitions_sharing_mass: usize,
    pub failures: Vec<Failure>,
}

fn nondecreasing(xs: &[Option<f64>]) -> bool {
    xs.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b >= a))
}

fn last_exceeds_first(xs: &[Option<f64>]) -> bool {
    matches!((xs.first(), xs.last()), (Some(Some(a)), Some(Some(b))) if b > a)
}

fn median_of(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5).ok()
}

impl SolverEnsemble {
    /// Localization records sorted by (t, seed).
    pub fn records(&self) -> Vec<&LocalizationRecord> {
        let mut v: Vec<&LocalizationRecord> = self.runs.iter().flat_map(|r| &r.records).collect();
        v.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.seed.cmp(&b.seed)));
        v
    }

    fn at(&self, t: f64) -> Vec<&LocalizationRecord> {
        self.runs.iter().flat_map(|r| &r.records).filter(|r| r.t == t).collect()
    }

    pub fn localization_summary(&self) -> LocalizationSummary {
        let (lo, hi) = sandwich_bracket(self.d);
        let per_t: Vec<LocalizationAggregate> = self
            .t_grid
            .iter()
            .map(|&t| {
                let here = self.at(t);
                let n = here.len();
                let frac = |f: &dyn Fn(&LocalizationRecord) -> bool| {
                    if n == 0 {
                        f64::NAN
                    } else {
                        here.iter().filter(|r| f(r)).count() as f64 / n as f64
                    }
                };
                let r1: Vec<f64> = here.iter().map(|r| r.r1).collect();
                let r2: Vec<f64> = here.iter().map(|r| r.r2).collect();
                let sw = here.iter().map(|r| r.sandwich);
                LocalizationAggregate {
                    t,
                    n,
                    r1: Quantiles::of(&r1),
                    r2: Quantiles::of(&r2),
                    frac_argmax_in_top2: frac(&|r| r.argmax_in_top2),
                    frac_gap13_exceeds: frac(&|r| r.gap13_ratio >= 1.0),
                    sandwich_min: sw.clone().fold(f64::INFINITY, f64::min),
                    sandwich_max: sw.fold(f64::NEG_INFINITY, f64::max),
                    sandwich_violations: here.iter().filter(|r| !(r.sandwich >= lo && r.sandwich <= hi)).count(),
                }
            })
            .collect();
        let med_r2: Vec<Option<f64>> = per_t.iter().map(|a| a.r2.as_ref().map(|q| q.q50)).collect();
        let med_r1: Vec<Option<f64>> = per_t.iter().map(|a| a.r1.as_ref().map(|q| q.q50)).collect();
        LocalizationSummary {
            sandwich_bracket: (lo, hi),
            sandwich_violations: per_t.iter().map(|a| a.sandwich_violations).sum(),
            median_r2_nondecreasing: nondecreasing(&med_r2),
            median_r1_last_exceeds_first: last_exceeds_first(&med_r1),
            per_t,
            failures: self.failures.clone(),
        }
    }

    pub fn two_cities_summary(&self) -> TwoCitiesSummary {
        let per_t: Vec<TwoCitiesAggregate> = self
            .t_grid
            .iter()
            .map(|&t| {
                let here = self.at(t);
                let r1: Vec<f64> = here.iter().map(|r| r.r1).collect();
                let r2: Vec<f64> = here.iter().map(|r| r.r2).collect();
                TwoCitiesAggregate {
                    t,
                    n: here.len(),
                    median_r1: median_of(&r1),
                    median_r2: median_of(&r2),
                }
            })
            .collect();
        let med: Vec<Option<f64>> = per_t.iter().map(|a| a.median_r2).collect();
        let all = self.runs.iter().flat_map(|r| &r.track.transitions);
        TwoCitiesSummary {
            median_r2_nondecreasing: nondecreasing(&med),
            median_r2_last_exceeds_first: last_exceeds_first(&med),
            transitions: all.clone().count(),
            transitions_sharing_mass: all.filter(|tr| tr.shares_mass()).count(),
            per_t,
            failures: self.failures.clone(),
        }
    }

    pub fn localization_csv(&self) -> Result<Vec<u8>> {
        let header = [
            "seed",
            "t",
            "logU",
            "r1",
            "r2",
            "argmax_in_top2",
            "gap13_ratio",
            "gap12_ratio",
            "boundary_frac",
            "phi1",
            "sandwich",
        ]
        .map(String::from)
        .to_vec();
        let rows = self.records().into_iter().map(|r| {
            vec![
                r.seed.to_string(),
                num(r.t),
                num(r.log_u),
                num(r.r1),
                num(r.r2),
                r.argmax_in_top2.to_string(),
                num(r.gap13_ratio),
                num(r.gap12_ratio),
                num(r.boundary_frac),
                num(r.phi1),
                num(r.sandwich),
            ]
        });
        csv_bytes(header, rows)
    }

    pub fn track_csv(&self) -> Result<Vec<u8>> {
        let d = self.d;
        let mut header = vec!["seed".to_string(), "t".to_string()];
        header.extend(site_header("z1", d));
        header.extend(site_header("z2", d));
        header.extend(site_header("argmax", d));
        header.extend(["r1", "r2", "logU"].map(String::from));
        let mut rows: Vec<(f64, u64, Vec<String>)> = Vec::new();
        for run in &self.runs {
            for p in &run.track.points {
                let mut row = vec![run.seed.to_string(), num(p.t)];
                for z in [&p.z1, &p.z2, &p.argmax] {
                    push_site(&mut row, &coords_f64(z));
                }
                row.extend([p.r1, p.r2, p.log_u].map(num));
                rows.push((p.t, run.seed, row));
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        csv_bytes(header, rows.into_iter().map(|r| r.2))
    }

    pub fn transitions_csv(&self) -> Result<Vec<u8>> {
        let d = self.d;
        let mut header = vec!["seed".to_string(), "t_before".to_string(), "t_after".to_string()];
        header.extend(site_header("old", d));
        header.extend(site_header("new", d));
        header.extend(
            [
                "split_before",
                "split_after",
                "r1_before",
                "r1_after",
                "r2_before",
                "r2_after",
                "log_w2_before",
                "log_w2_after",
                "shares_mass",
            ]
            .map(String::from),
        );
        let rows = self.runs.iter().flat_map(|run| {
            run.track.transitions.iter().map(move |tr| {
                let mut row = vec![run.seed.to_string(), num(tr.t_before), num(tr.t_after)];
                push_site(&mut row, &coords_f64(&tr.old_site));
                push_site(&mut row, &coords_f64(&tr.new_site));
                row.extend(
                    [
                        tr.split_before,
                        tr.split_after,
                        tr.r1_before,
                        tr.r1_after,
                        tr.r2_before,
                        tr.r2_after,
                        tr.log_w2_before,
                        tr.log_w2_after,
                    ]
                    .map(num),
                );
                row.push(tr.shares_mass().to_string());
                row
            })
        });
        csv_bytes(header, rows)
    }

    pub fn write_localization(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        let files = vec![
            (RECORDS, self.localization_csv()?),
            (SUMMARY, serde_json::to_vec_pretty(&self.localization_summary())?),
        ];
        write_with_manifest(dir, "experiment localization", cfg, files)
    }

    pub fn write_two_cities(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        let files = vec![
            (RECORDS, self.track_csv()?),
            (TRANSITIONS, self.transitions_csv()?),
            (SUMMARY, serde_json::to_vec_pretty(&self.two_cities_summary())?),
        ];
        write_with_manifest(dir, "experiment two-cities", cfg, files)
    }
}

/// Runs of the solver ensemble summarized for localization.
pub fn localization_experiment(cfg: &ExperimentConfig) -> Result<SolverEnsemble> {
    solver_ensemble(cfg)
}

/// Runs of the solver ensemble summarized for two-cities tracking.
pub fn two_cities_experiment(cfg: &ExperimentConfig) -> Result<SolverEnsemble> {
    solver_ensemble(cfg)
}

// ------------------------------------------------------------------ output

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// file name → SHA-256 (hex)
    pub artifacts: std::collections::BTreeMap<String, String>,
    pub created_unix: u64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// The experiment config recorded in the manifest.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_value(self.config.clone())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `files` into `dir` and a `manifest.json` beside them.
pub fn write_with_manifest(
    dir: &Path,
    command: &str,
    config: &impl Serialize,
    files: Vec<(&str, Vec<u8>)>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut artifacts = std::collections::BTreeMap::new();
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes)?;
        artifacts.insert(name.to_string(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config: serde_json::to_value(config)?,
        artifacts,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}
