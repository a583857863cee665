//! Ensemble configuration: a flat TOML document, optionally overridden key
//! by key, validated before any work starts.
//!
//! ```toml
//! d = 1
//! alpha = 2.0
//! seed_count = 100
//! t_grid = [5.0, 10.0, 20.0, 40.0]
//! solver_tol = 1e-6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::ScalingBundle;
use crate::solver::SolverConfig;
use crate::variational::{DiagnosticsConfig, ScanConfig};

fn default_k() -> usize {
    3
}
fn default_target_eps() -> f64 {
    1e-6
}
fn default_scan_radius_cap() -> u64 {
    1 << 30
}
fn default_scan_max_sites() -> u64 {
    1_000_000_000
}
fn default_solver_tol() -> f64 {
    1e-6
}
fn default_boundary_threshold() -> f64 {
    1e-10
}
fn default_box_growth() -> f64 {
    1.5
}
fn default_box_radius_cap() -> usize {
    100_000
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    0.5
}
fn default_rho() -> f64 {
    0.2
}
fn default_sigma() -> f64 {
    0.45
}
fn default_nu() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub alpha: f64,
    /// Explicit seeds; alternatively `seed_count` seeds from `first_seed`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_count: Option<u64>,
    #[serde(default)]
    pub first_seed: u64,
    pub t_grid: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_target_eps")]
    pub target_eps: f64,
    #[serde(default = "default_scan_radius_cap")]
    pub scan_radius_cap: u64,
    #[serde(default = "default_scan_max_sites")]
    pub scan_max_sites: u64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_boundary_threshold")]
    pub boundary_threshold: f64,
    #[serde(default = "default_box_growth")]
    pub box_growth: f64,
    /// Initial box radius; 2·r_t·g_t at the last grid time when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_radius: Option<usize>,
    #[serde(default = "default_box_radius_cap")]
    pub box_radius_cap: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// β of λ_t = (log t)^{−β}; 1 + 1/(α−d) + 0.5 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn bad(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Deserializes and validates a key/value table.
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The config as a table, for merging overrides.
    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(bad("d", "must be at least 1"));
        }
        if !(self.alpha > self.d as f64) || !self.alpha.is_finite() {
            return Err(bad("alpha", format!("must exceed d = {} (got {})", self.d, self.alpha)));
        }
        match (self.seeds.is_empty(), self.seed_count) {
            (true, None) => return Err(bad("seeds", "give `seeds` or `seed_count`")),
            (false, Some(_)) => return Err(bad("seeds", "give only one of `seeds` and `seed_count`")),
            (true, Some(0)) => return Err(bad("seed_count", "must be at least 1")),
            _ => {}
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("seeds", "must be distinct"));
        }
        if self.first_seed.checked_add(self.seed_count.unwrap_or(0)).is_none() {
            return Err(bad("seed_count", "seed range overflows"));
        }
        if self.t_grid.is_empty() {
            return Err(bad("t_grid", "must be nonempty"));
        }
        if self.t_grid.iter().any(|t| !(*t > 1.0) || !t.is_finite()) {
            return Err(bad("t_grid", "all times must be finite and > 1"));
        }
        if self.t_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(bad("t_grid", "must be strictly increasing"));
        }
        if self.k == 0 {
            return Err(bad("k", "must be at least 1"));
        }
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(bad(name, format!("must lie in (0, 1) (got {v})")))
            }
        };
        open_unit("target_eps", self.target_eps)?;
        open_unit("solver_tol", self.solver_tol)?;
        if !(self.boundary_threshold > 0.0) {
            return Err(bad("boundary_threshold", "must be positive"));
        }
        if !(self.box_growth > 1.0) {
            return Err(bad("box_growth", "must exceed 1"));
        }
        if self.box_radius.is_some_and(|r| r > self.box_radius_cap) {
            return Err(bad("box_radius", "exceeds box_radius_cap"));
        }
        if self.scan_radius_cap == 0 || self.scan_max_sites == 0 {
            return Err(bad("scan_radius_cap", "scan caps must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(bad("epsilon", "must be positive"));
        }
        if !(self.delta > 0.0) {
            return Err(bad("delta", "must be positive"));
        }
        self.bundle()?;
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match self.seed_count {
            Some(n) => (self.first_seed..self.first_seed + n).collect(),
            None => self.seeds.clone(),
        }
    }

    pub fn bundle(&self) -> Result<ScalingBundle> {
        let b = ScalingBundle::new(self.d, self.alpha)?;
        let beta = self.beta.unwrap_or(b.beta);
        b.with_exponents(self.rho, self.sigma, self.nu, beta)
            .map_err(|e| Error::Config(format!("scaling exponents: {e}")))
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            target_eps: self.target_eps,
            radius_cap: self.scan_radius_cap,
            max_sites: self.scan_max_sites,
            ..ScanConfig::default()
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.solver_tol,
            boundary_threshold: self.boundary_threshold,
            box_growth: self.box_growth,
            radius_cap: self.box_radius_cap,
            ..SolverConfig::default()
        }
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }
}
