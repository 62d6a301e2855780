//! Closed-form reference laws.
//!
//! | law | CDF |
//! |-----|-----|
//! | `s·E/|N|` | `1 − 2e^{a²/2}(1 − Φ(a))`, `a = t/s`, i.e. `1 − erfcx(a/√2)` |
//! | `N^{−2}` (Lévy ½) | `2(1 − Φ(1/√t)) = erfc(1/√(2t))` |
//! | `Exp(1)` | `1 − e^{−t}` |
//! | `N(0, v)` | `Φ(t/√v)` |
//!
//! The `E/|N|` survival follows from `P(sE/|N| > t) = E[e^{−t|N|/s}]`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::special::{erfcx, norm_cdf};
use super::LawError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceLaw {
    /// `scale · E/|N|` with `E ~ Exp(1)` and `N ~ N(0,1)` independent.
    ExpOverAbsNormal { scale: f64 },
    /// `N^{−2}`, the one-sided stable law of index ½.
    InverseNormalSquared,
    ExponentialMeanOne,
    Gaussian { variance: f64 },
}

impl ReferenceLaw {
    pub fn validate(&self) -> Result<(), LawError> {
        match *self {
            ReferenceLaw::ExpOverAbsNormal { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(LawError::InvalidParameter(format!("scale must be positive, got {scale}")))
            }
            ReferenceLaw::Gaussian { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(LawError::InvalidParameter(format!("variance must be positive, got {variance}")))
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            ReferenceLaw::ExpOverAbsNormal { scale } => {
                if t <= 0.0 {
                    0.0
                } else {
                    1.0 - erfcx(t / scale * FRAC_1_SQRT_2)
                }
            }
            ReferenceLaw::InverseNormalSquared => {
                if t <= 0.0 {
                    0.0
                } else {
                    libm::erfc(1.0 / (2.0 * t).sqrt())
                }
            }
            ReferenceLaw::ExponentialMeanOne => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-t).exp_m1()
                }
            }
            ReferenceLaw::Gaussian { variance } => norm_cdf(t / variance.sqrt()),
        }
    }

    /// `1 − cdf(t)` computed without cancellation where a closed form allows.
    pub fn sf(&self, t: f64) -> f64 {
        match *self {
            ReferenceLaw::ExpOverAbsNormal { scale } => {
                if t <= 0.0 {
                    1.0
                } else {
                    erfcx(t / scale * FRAC_1_SQRT_2)
                }
            }
            ReferenceLaw::InverseNormalSquared => {
                if t <= 0.0 {
                    1.0
                } else {
                    libm::erf(1.0 / (2.0 * t).sqrt())
                }
            }
            ReferenceLaw::ExponentialMeanOne => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-t).exp()
                }
            }
            ReferenceLaw::Gaussian { variance } => norm_cdf(-t / variance.sqrt()),
        }
    }

    /// Generalized inverse of the CDF by bisection; `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0,1)");
        let (mut lo, mut hi) = match self {
            ReferenceLaw::Gaussian { .. } => (-1.0, 1.0),
            _ => (0.0, 1.0),
        };
        while self.cdf(lo) > p {
            lo = 2.0 * lo - 1.0;
        }
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Draw one variate directly from the defining construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ReferenceLaw::ExpOverAbsNormal { scale } => {
                let e: f64 = rng.sample(Exp1);
                let n: f64 = rng.sample(StandardNormal);
                scale * e / n.abs()
            }
            ReferenceLaw::InverseNormalSquared => {
                let n: f64 = rng.sample(StandardNormal);
                1.0 / (n * n)
            }
            ReferenceLaw::ExponentialMeanOne => rng.sample(Exp1),
            ReferenceLaw::Gaussian { variance } => {
                let n: f64 = rng.sample(StandardNormal);
                n * variance.sqrt()
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ReferenceLaw::ExpOverAbsNormal { scale } => format!("{scale}*E/|N|"),
            ReferenceLaw::InverseNormalSquared => "N^-2".to_string(),
            ReferenceLaw::ExponentialMeanOne => "Exp(1)".to_string(),
            ReferenceLaw::Gaussian { variance } => format!("N(0,{variance})"),
        }
    }
}

/// `c_β = (β·Γ(½))^{−1} = 1/(β√π)`, the constant in `E[e^{−sW}] = 1/(1 + c_β√s)`.
pub fn c_beta(beta: f64) -> f64 {
    1.0 / (beta * PI.sqrt())
}

/// The `s·E/|N|` law that solves the renewal integral equation with rate `β`.
///
/// Its square has Laplace transform `1/(1 + c_β√s)`. Since
/// `E[e^{−s a² E²/N²}] = 1/(1 + a√(2s))`, the matching scale is
/// `a = c_β/√2 = 1/(β√(2π))`.
pub fn renewal_limit_law(beta: f64) -> ReferenceLaw {
    ReferenceLaw::ExpOverAbsNormal { scale: c_beta(beta) * FRAC_1_SQRT_2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn all_laws() -> Vec<ReferenceLaw> {
        vec![
            ReferenceLaw::ExpOverAbsNormal { scale: 1.0 },
            ReferenceLaw::ExpOverAbsNormal { scale: 0.3 },
            ReferenceLaw::InverseNormalSquared,
            ReferenceLaw::ExponentialMeanOne,
            ReferenceLaw::Gaussian { variance: 2.5 },
        ]
    }

    #[test]
    fn exp_over_abs_normal_values() {
        let law = ReferenceLaw::ExpOverAbsNormal { scale: 1.0 };
        assert_eq!(law.cdf(0.0), 0.0);
        assert!(law.cdf(1e9) > 1.0 - 1e-9);
        // 1 − 2e^{1/2}(1 − Φ(1)) with 1 − Φ(1) = 0.158655253931457051414767454368
        let expected = 1.0 - 2.0 * 0.5f64.exp() * 0.158_655_253_931_457_05;
        assert!((law.cdf(1.0) - expected).abs() < 1e-15);
        // 0.476843416269753256636312326309
        assert!((law.cdf(1.0) - 0.476_843_416_269_753_3).abs() < 1e-15);
    }

    #[test]
    fn exp_over_abs_normal_matches_monte_carlo() {
        // E[1 − e^{−t|N|}] estimated by sampling the construction.
        let law = ReferenceLaw::ExpOverAbsNormal { scale: 1.0 };
        let mut rng = stream(11, 0);
        let n = 400_000;
        let hits = (0..n).filter(|_| law.sample(&mut rng) <= 1.0).count();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - law.cdf(1.0)).abs() < 4.0 * se, "{p} vs {}", law.cdf(1.0));
    }

    #[test]
    fn inverse_normal_squared_at_one() {
        // P(N^{-2} ≤ 1) = P(|N| ≥ 1) = 2(1 − Φ(1))
        let v = ReferenceLaw::InverseNormalSquared.cdf(1.0);
        assert!((v - 2.0 * 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((v - 0.3173).abs() < 1e-4);
    }

    #[test]
    fn cdfs_are_monotone_with_correct_limits() {
        for law in all_laws() {
            let grid: Vec<f64> = (0..10_000).map(|i| -50.0 + i as f64 * 0.02).collect();
            let mut prev = 0.0;
            for &t in &grid {
                let c = law.cdf(t);
                assert!((0.0..=1.0).contains(&c));
                assert!(c + 1e-15 >= prev, "{law:?} not monotone at {t}");
                prev = c;
            }
            assert!(law.cdf(-1e12) < 1e-12);
            assert!(law.cdf(1e12) > 1.0 - 1e-6, "{law:?}");
            // right-continuity at a grid point
            assert!((law.cdf(1.0 + 1e-12) - law.cdf(1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn sf_complements_cdf() {
        for law in all_laws() {
            for t in [0.1, 0.7, 1.0, 3.0, 10.0] {
                assert!((law.sf(t) + law.cdf(t) - 1.0).abs() < 1e-14, "{law:?} at {t}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for law in all_laws() {
            for p in [0.01, 0.25, 0.5, 0.9] {
                let q = law.quantile(p);
                assert!((law.cdf(q) - p).abs() < 1e-12, "{law:?} p={p}");
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ReferenceLaw::ExpOverAbsNormal { scale: 0.0 }.validate().is_err());
        assert!(ReferenceLaw::Gaussian { variance: -1.0 }.validate().is_err());
        assert!(ReferenceLaw::InverseNormalSquared.validate().is_ok());
    }

    #[test]
    fn renewal_scale_is_c_beta_over_root_two() {
        let law = renewal_limit_law(1.0);
        match law {
            ReferenceLaw::ExpOverAbsNormal { scale } => {
                assert!((scale - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15)
            }
            _ => unreachable!(),
        }
    }
}
