use thiserror::Error;

use crate::variational::PhiScanResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("path-count DP budget exceeded: n = {n} > {budget}")]
    DpBudgetExceeded { n: u64, budget: u64 },

    #[error("no path of length {n} from the origin passes through {site}")]
    EmptyPathSet { n: u64, site: String },

    #[error("psi is undefined for a = 0 and x = {x} < 0")]
    PsiDomain { x: f64 },

    #[error("field has no tail law usable for certified truncation")]
    UncertifiableField,

    #[error("scan radius cap {cap} reached with miss bound {bound:e} above target {target:e}")]
    ScanBudgetExceeded {
        cap: u64,
        bound: f64,
        target: f64,
        partial: Box<PhiScanResult>,
    },

    #[error("solver box radius {requested} exceeds cap {cap}")]
    BoxCapExceeded { requested: usize, cap: usize },

    #[error("non-finite solver value at t = {t}")]
    NonFinite { t: f64 },

    #[error("site {site} lies outside the solver box of radius {radius}")]
    OutsideBox { site: String, radius: usize },

    #[error("predicted relative standard error {predicted:.3e} exceeds bound {bound:.3e} at t = {t}")]
    TimeTooLarge { t: f64, predicted: f64, bound: f64 },

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("spectral gap needs at least two sites")]
    GapNeedsTwoSites,

    #[error("spectral gap {gap} does not exceed 2d = {two_d}; decay bound is vacuous")]
    GapTooSmall { gap: f64, two_d: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
