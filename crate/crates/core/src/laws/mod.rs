//! Reference distributions, empirical comparison, and analytic identity checks.

pub mod empirical;
pub mod identities;
pub mod quadrature;
pub mod reference;
pub mod regression;
pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use empirical::{fit_median_scale, ks_critical, ks_distance, EmpiricalDistribution, KsReport, KS_COEF_95, KS_COEF_99};
pub use reference::{c_beta, renewal_limit_law, ReferenceLaw};
pub use regression::{exponent_regression, Regression};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty sample")]
    EmptySample,
    #[error("median lies in the censored range")]
    MedianCensored,
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("regression failed: {0}")]
    Regression(String),
    #[error(
        "entropy fluctuation variance is zero: the measure is the measure of maximal \
         entropy, for which log ν(C_k) is deterministic; use a non-uniform potential"
    )]
    MaximalEntropy,
}

/// A named pass/fail outcome, serialized into `verdicts.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub verdict: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported for the record without gating.
    Info,
}

impl Verdict {
    /// Pass iff `statistic ≤ upper`.
    pub fn at_most(name: impl Into<String>, statistic: f64, n: usize, upper: f64) -> Self {
        let verdict = if statistic <= upper { Outcome::Pass } else { Outcome::Fail };
        Verdict { name: name.into(), statistic, n, lower: None, upper: Some(upper), verdict }
    }

    /// Pass iff `lo ≤ statistic ≤ hi`.
    pub fn within(name: impl Into<String>, statistic: f64, n: usize, lo: f64, hi: f64) -> Self {
        let ok = statistic >= lo && statistic <= hi;
        Verdict {
            name: name.into(),
            statistic,
            n,
            lower: Some(lo),
            upper: Some(hi),
            verdict: if ok { Outcome::Pass } else { Outcome::Fail },
        }
    }

    pub fn info(name: impl Into<String>, statistic: f64, n: usize) -> Self {
        Verdict { name: name.into(), statistic, n, lower: None, upper: None, verdict: Outcome::Info }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Outcome::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub n: usize,
    pub ks: f64,
    pub mean: f64,
    pub mean_std_error: f64,
    pub variance: f64,
    /// `variance / (2σ_h²)`.
    pub variance_ratio: f64,
}

impl FluctuationReport {
    /// `|mean| ≤ 3·SE`.
    pub fn centered(&self) -> bool {
        self.mean.abs() <= 3.0 * self.mean_std_error
    }
}

/// Compare `(log√τ − k·d)/√k` samples with `N(0, 2σ_h²)`.
pub fn fluctuation_test(samples: &[f64], sigma2_h: f64) -> Result<FluctuationReport, LawError> {
    if !(sigma2_h.is_finite() && sigma2_h >= 0.0) {
        return Err(LawError::InvalidParameter(format!("sigma2_h = {sigma2_h}")));
    }
    if sigma2_h <= 1e-12 {
        return Err(LawError::MaximalEntropy);
    }
    if samples.len() < 2 {
        return Err(LawError::EmptySample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let law = ReferenceLaw::Gaussian { variance: 2.0 * sigma2_h };
    let ks = ks_distance(&EmpiricalDistribution::new(samples.to_vec())?, &law)?.statistic;
    Ok(FluctuationReport {
        n: samples.len(),
        ks,
        mean,
        mean_std_error: (variance / n).sqrt(),
        variance,
        variance_ratio: variance / (2.0 * sigma2_h),
    })
}
