//! Empirical distributions, one-sample Kolmogorov–Smirnov, median scale fits.
//!
//! Right censoring is handled with a single threshold `T`: every sample is
//! known to lie either at its recorded value (when below `T`) or somewhere at
//! or above `T`. The empirical CDF keeps the full count `n` in the
//! denominator (no renormalization), so below `T` it is an unbiased estimate
//! of the unconditional CDF and the KS supremum is taken over `t < T` only,
//! closed off by the jump into `[T, ∞)`.

use serde::{Deserialize, Serialize};

use super::reference::ReferenceLaw;
use super::LawError;

/// Kolmogorov critical value coefficient at 99% confidence.
pub const KS_COEF_99: f64 = 1.63;
/// Kolmogorov critical value coefficient at 95% confidence.
pub const KS_COEF_95: f64 = 1.36;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    censor_threshold: Option<f64>,
}

impl EmpiricalDistribution {
    /// Uncensored sample. NaNs are rejected.
    pub fn new(mut samples: Vec<f64>) -> Result<Self, LawError> {
        if samples.iter().any(|x| x.is_nan()) {
            return Err(LawError::InvalidParameter("sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples, censor_threshold: None })
    }

    /// Sample whose values at or above `threshold` are only known to be there.
    ///
    /// Censored observations should be passed with any value `≥ threshold`
    /// (typically the value implied by the cap).
    pub fn censored(samples: Vec<f64>, threshold: f64) -> Result<Self, LawError> {
        if threshold.is_nan() {
            return Err(LawError::InvalidParameter("censor threshold is NaN".into()));
        }
        let mut emp = Self::new(samples)?;
        emp.censor_threshold = Some(threshold);
        Ok(emp)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn censor_threshold(&self) -> Option<f64> {
        self.censor_threshold
    }

    /// Number of samples strictly below the censor threshold (all if none).
    pub fn n_observed(&self) -> usize {
        match self.censor_threshold {
            None => self.samples.len(),
            Some(t) => self.samples.partition_point(|&x| x < t),
        }
    }

    /// Empirical CDF `#{x ≤ t}/n`; `None` at or above the censor threshold.
    pub fn cdf(&self, t: f64) -> Option<f64> {
        if self.samples.is_empty() || self.censor_threshold.is_some_and(|c| t >= c) {
            return None;
        }
        let k = self.samples.partition_point(|&x| x <= t);
        Some(k as f64 / self.samples.len() as f64)
    }

    /// Lower empirical quantile `x_(⌈pn⌉)`; `None` if it falls in the censored range.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.samples.is_empty() || !(0.0..=1.0).contains(&p) {
            return None;
        }
        let n = self.samples.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        let x = self.samples[idx];
        match self.censor_threshold {
            Some(c) if x >= c => None,
            _ => Some(x),
        }
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }

    /// Apply a monotone increasing map to every value and the threshold.
    pub fn map_monotone<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self, LawError> {
        let samples = self.samples.iter().map(|&x| f(x)).collect();
        match self.censor_threshold {
            None => Self::new(samples),
            Some(t) => Self::censored(samples, f(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    /// Total sample count, censored included.
    pub n: usize,
    /// Samples strictly below the censor threshold.
    pub n_observed: usize,
    pub censor_threshold: Option<f64>,
    /// Reference probability mass below the threshold (1 when uncensored).
    pub reference_mass_below: f64,
}

impl KsReport {
    pub fn critical(&self, coef: f64) -> f64 {
        ks_critical(self.n, coef)
    }
}

/// `coef/√n`, the asymptotic Kolmogorov critical value.
pub fn ks_critical(n: usize, coef: f64) -> f64 {
    coef / (n as f64).sqrt()
}

/// One-sample KS distance, restricted to `t < T` when censored.
pub fn ks_distance(emp: &EmpiricalDistribution, law: &ReferenceLaw) -> Result<KsReport, LawError> {
    law.validate()?;
    let n = emp.len();
    if n == 0 {
        return Err(LawError::EmptySample);
    }
    let nf = n as f64;
    let m = emp.n_observed();
    let mut d: f64 = 0.0;
    for (i, &x) in emp.samples[..m].iter().enumerate() {
        let f = law.cdf(x);
        d = d.max(((i + 1) as f64 / nf - f).abs());
        d = d.max((f - i as f64 / nf).abs());
    }
    let reference_mass_below = match emp.censor_threshold {
        Some(t) => {
            let f_t = law.cdf(t);
            // F_n is flat at m/n on [x_(m), T).
            d = d.max((m as f64 / nf - f_t).abs());
            f_t
        }
        None => 1.0,
    };
    Ok(KsReport {
        statistic: d,
        n,
        n_observed: m,
        censor_threshold: emp.censor_threshold,
        reference_mass_below,
    })
}

/// Two-sample KS distance between uncensored samples.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64, LawError> {
    if a.is_empty() || b.is_empty() {
        return Err(LawError::EmptySample);
    }
    let (xa, xb) = (a.samples(), b.samples());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Scale `s` such that the median of `s·E/|N|` equals the empirical median.
pub fn fit_median_scale(emp: &EmpiricalDistribution) -> Result<f64, LawError> {
    let m = emp.median().ok_or(LawError::MedianCensored)?;
    if m <= 0.0 {
        return Err(LawError::InvalidParameter(format!("median {m} is not positive")));
    }
    Ok(m / ReferenceLaw::ExpOverAbsNormal { scale: 1.0 }.median())
}
