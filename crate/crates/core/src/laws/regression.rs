//! Ordinary least squares for recurrence-exponent estimates.

use serde::{Deserialize, Serialize};

use super::LawError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Fit `y = slope·x + intercept` to `(x, y)` pairs, e.g. `(−log ε, log median τ)`.
pub fn exponent_regression(pairs: &[(f64, f64)]) -> Result<Regression, LawError> {
    if pairs.len() < 3 {
        return Err(LawError::Regression(format!("need at least 3 points, got {}", pairs.len())));
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(LawError::Regression("non-finite coordinate".into()));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= (scale * 1e-12).powi(2) * n {
        return Err(LawError::Regression("abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(Regression { slope, intercept, r_squared, n: pairs.len() })
}
