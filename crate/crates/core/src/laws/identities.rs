//! Numerical checks of the analytic identities behind the `E/|N|` limit.
//!
//! * `E[e^{−tN^{−2}}] = e^{−√(2t)}` by quadrature over the normal density.
//! * `E[e^{−sW}] = 1/(1 + c√s)` for `W = (c²/2)·E²/N²` by Monte Carlo.
//! * the renewal equation `1 = P(X > t) + βt∫₀¹ P(X > t√(1−u)) u^{−1/2} du`
//!   for `X = a·E/|N|` by quadrature after `u = v²`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::reference::ReferenceLaw;
use super::LawError;
use crate::rng::stream;

const QUAD_TOL: f64 = 1e-13;

/// `E[e^{−t/Z²}] = 2∫₀^∞ φ(z) e^{−t/z²} dz`, truncated at `z = 40`.
pub fn laplace_inverse_normal_sq(t: f64) -> Result<f64, LawError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LawError::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    let q = integrate(
        |z| {
            if z == 0.0 {
                if t > 0.0 { 0.0 } else { super::special::norm_pdf(0.0) }
            } else {
                super::special::norm_pdf(z) * (-t / (z * z)).exp()
            }
        },
        0.0,
        40.0,
        QUAD_TOL,
    )?;
    Ok(2.0 * q.value)
}

/// Max `|E[e^{−tN^{−2}}] − e^{−√(2t)}|` over `t_list`.
pub fn laplace_check_inverse_normal_sq(t_list: &[f64]) -> Result<f64, LawError> {
    let mut worst: f64 = 0.0;
    for &t in t_list {
        let v = laplace_inverse_normal_sq(t)?;
        worst = worst.max((v - (-(2.0 * t).sqrt()).exp()).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint {
    pub s: f64,
    pub empirical: f64,
    pub expected: f64,
    pub std_error: f64,
}

impl LaplacePoint {
    /// Deviation in units of the Monte Carlo standard error.
    pub fn z_score(&self) -> f64 {
        let d = self.empirical - self.expected;
        if self.std_error > 0.0 { d / self.std_error } else if d == 0.0 { 0.0 } else { f64::INFINITY }
    }
}

/// Monte Carlo Laplace transform of `W = w_scale·E²/N²` against `1/(1 + c√s)`.
///
/// The transform of `a²E²/N²` is `1/(1 + a√(2s))`, so `w_scale = c²/2`
/// reproduces `1/(1 + c√s)`; passing `c²` is the negative control.
pub fn laplace_check_w(
    c: f64,
    w_scale: f64,
    s_list: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<LaplacePoint>, LawError> {
    if !(c > 0.0 && w_scale > 0.0) {
        return Err(LawError::InvalidParameter("c and w_scale must be positive".into()));
    }
    if n_draws < 2 {
        return Err(LawError::InvalidParameter("need at least 2 draws".into()));
    }
    let mut rng = stream(seed, 0);
    let mut sum = vec![0.0f64; s_list.len()];
    let mut sum_sq = vec![0.0f64; s_list.len()];
    for _ in 0..n_draws {
        let e: f64 = rng.sample(Exp1);
        let z: f64 = rng.sample(StandardNormal);
        let w = w_scale * e * e / (z * z);
        for (j, &s) in s_list.iter().enumerate() {
            let v = (-s * w).exp();
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    let n = n_draws as f64;
    Ok(s_list
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let mean = sum[j] / n;
            let var = (sum_sq[j] / n - mean * mean).max(0.0) * n / (n - 1.0);
            LaplacePoint {
                s,
                empirical: mean,
                expected: 1.0 / (1.0 + c * s.sqrt()),
                std_error: (var / n).sqrt(),
            }
        })
        .collect())
}

/// `I(t) = ∫₀¹ f(t√(1−u))/√u du = 2∫₀¹ f(t√(1−v²)) dv` with `f` the survival of `law`.
pub fn renewal_integral(law: &ReferenceLaw, t: f64) -> Result<f64, LawError> {
    let q = integrate(|v| law.sf(t * (1.0 - v * v).max(0.0).sqrt()), 0.0, 1.0, QUAD_TOL)?;
    Ok(2.0 * q.value)
}

/// Max over `t_list` of `|1 − P(X > t) − βt·I(t)|`.
pub fn integral_equation_residual(
    law: &ReferenceLaw,
    beta: f64,
    t_list: &[f64],
) -> Result<f64, LawError> {
    law.validate()?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LawError::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let mut worst: f64 = 0.0;
    for &t in t_list {
        let r = 1.0 - law.sf(t) - beta * t * renewal_integral(law, t)?;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}
