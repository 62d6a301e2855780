//! Toy model: a simple symmetric random walk on Z paired with i.i.d. uniform
//! points of `(0,1)^d`.
//!
//! The walk returns to 0 at the times `R_1 < R_2 < …`, whose increments are
//! i.i.d. with `P(R_1 > 2n) = u_n = C(2n,n)/4^n`. At the `l`-th return a fresh
//! uniform point `Y_{R_l}` is compared with the starting point `Y_0`, and
//! `τ_ε = R_{T_ε}` where `T_ε` is the first `l` with `Y_{R_l} ∈ B(Y_0, ε)`.
//!
//! Because `P(R_1 > s) ~ √(2/(πs))`, direct simulation has infinite expected
//! cost; [`FirstReturnSampler`] inverts the survival function exactly.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laws::{exponent_regression, LawError, Regression};
use crate::rng::{open_unit, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error("invalid toy configuration: {0}")]
    InvalidConfig(String),
    #[error("step cap must be positive")]
    ZeroStepCap,
    #[error("return-time accumulator overflowed after {completed} excursions")]
    Overflow { completed: u64 },
    #[error("median at eps={eps} is censored; raise the step cap")]
    MedianCensored { eps: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyMode {
    /// `T_ε` drawn directly from `Geometric(c·ε^d)`.
    Idealized,
    /// Explicit `Y_0` and a fresh uniform `Y` at every return.
    Faithful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BallNorm {
    #[default]
    Euclidean,
    Max,
}

/// Lebesgue measure of the unit ball of `norm` in dimension `dim`.
pub fn unit_ball_volume(dim: u32, norm: BallNorm) -> f64 {
    match norm {
        BallNorm::Max => 2f64.powi(dim as i32),
        BallNorm::Euclidean => {
            // V_d = V_{d−2}·2π/d with V_0 = 1, V_1 = 2.
            let mut v = if dim.is_multiple_of(2) { 1.0 } else { 2.0 };
            let mut d = if dim.is_multiple_of(2) { 2 } else { 3 };
            while d <= dim {
                v *= 2.0 * PI / d as f64;
                d += 2;
            }
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub dim: u32,
    pub eps: f64,
    pub mode: ToyMode,
    #[serde(default)]
    pub norm: BallNorm,
}

impl ToyConfig {
    pub fn new(dim: u32, eps: f64, mode: ToyMode) -> Result<Self, ToyError> {
        let c = ToyConfig { dim, eps, mode, norm: BallNorm::Euclidean };
        c.validate()?;
        Ok(c)
    }

    pub fn with_norm(mut self, norm: BallNorm) -> Result<Self, ToyError> {
        self.norm = norm;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ToyError> {
        if self.dim == 0 {
            return Err(ToyError::InvalidConfig("dim must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(ToyError::InvalidConfig(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        let p = self.hit_probability();
        if !(p > 0.0 && p < 1.0) {
            return Err(ToyError::InvalidConfig(format!("c·eps^d = {p} must lie in (0,1)")));
        }
        Ok(())
    }

    /// The constant `c`, i.e. the unit-ball volume for `dim`.
    pub fn ball_constant(&self) -> f64 {
        unit_ball_volume(self.dim, self.norm)
    }

    /// `λ_ε = c·ε^d`, the per-return probability of landing in `B(Y_0, ε)`.
    pub fn hit_probability(&self) -> f64 {
        self.ball_constant() * self.eps.powi(self.dim as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauSample {
    /// `τ_ε`, or the step cap when censored.
    pub tau: u64,
    /// `T_ε` (the number of completed excursions when censored in faithful mode).
    pub t_count: u64,
    pub r_total: u64,
    pub censored: bool,
}

/// Table size: `u_n` is stored for `n ≤ 2^15`, i.e. return times up to `2^16`.
pub const TABLE_HALF_STEPS: usize = 1 << 15;

/// Exact inverse-survival sampler for the first return time `R_1`.
#[derive(Debug, Clone)]
pub struct FirstReturnSampler {
    /// `u[n] = P(R_1 > 2n)`, strictly decreasing, `u[0] = 1`.
    u: Vec<f64>,
}

impl Default for FirstReturnSampler {
    fn default() -> Self {
        Self::new()
    }
}

impl FirstReturnSampler {
    pub fn new() -> Self {
        let mut u = Vec::with_capacity(TABLE_HALF_STEPS + 1);
        u.push(1.0);
        for n in 1..=TABLE_HALF_STEPS {
            let prev = u[n - 1];
            u.push(prev * (2 * n - 1) as f64 / (2 * n) as f64);
        }
        FirstReturnSampler { u }
    }

    /// Process-wide shared table.
    pub fn shared() -> &'static FirstReturnSampler {
        static TABLE: OnceLock<FirstReturnSampler> = OnceLock::new();
        TABLE.get_or_init(FirstReturnSampler::new)
    }

    /// `P(R_1 > 2n)`; asymptotic series beyond the table.
    pub fn survival(&self, n: u64) -> f64 {
        match self.u.get(n as usize) {
            Some(&v) => v,
            None => ln_survival(n as f64).exp(),
        }
    }

    /// `P(R_1 = 2n) = u_{n−1} − u_n = u_{n−1}/(2n)`, for `n ≥ 1`.
    pub fn pmf(&self, n: u64) -> f64 {
        assert!(n >= 1, "first return happens at time 2n with n ≥ 1");
        self.survival(n - 1) / (2 * n) as f64
    }

    /// `R_1 = 2·min{n ≥ 1 : u_n < U}` for `U` uniform on `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        2 * self.half_time(open_unit(rng))
    }

    /// `min{n ≥ 1 : u_n < v}` for `v ∈ (0, 1]`.
    pub fn half_time(&self, v: f64) -> u128 {
        let last = self.u[TABLE_HALF_STEPS];
        if v > last {
            // u is decreasing; count of entries with u_n ≥ v among n ≥ 1.
            let k = self.u[1..].partition_point(|&x| x >= v);
            return (k + 1) as u128;
        }
        tail_half_time(v.ln())
    }
}

/// `ln u_n = −½ ln(πn) − 1/(8n) + 1/(192n³) − 1/(640n⁵) + O(n⁻⁷)`.
fn ln_survival(n: f64) -> f64 {
    let r = 1.0 / n;
    let r2 = r * r;
    -0.5 * (PI * n).ln() - r * (0.125 - r2 * (1.0 / 192.0 - r2 / 640.0))
}

fn d_ln_survival(n: f64) -> f64 {
    let r = 1.0 / n;
    let r2 = r * r;
    -0.5 * r + r2 * (0.125 - r2 * (3.0 / 192.0 - r2 * 5.0 / 640.0))
}

/// Smallest `n > 2^15` with `ln u_n < ln_v`.
///
/// Exact integer search while `n` is representable (< 2^53); beyond that the
/// real root rounded up is returned, which is as fine as `f64` can resolve.
fn tail_half_time(ln_v: f64) -> u128 {
    let floor = TABLE_HALF_STEPS as f64;
    // Leading order: u_n ≈ 1/√(πn).
    let mut n = (1.0 / (PI * (2.0 * ln_v).exp())).max(floor + 1.0);
    for _ in 0..50 {
        let step = (ln_survival(n) - ln_v) / d_ln_survival(n);
        let next = (n - step).max(floor + 1.0);
        if (next - n).abs() <= 1e-12 * n {
            n = next;
            break;
        }
        n = next;
    }
    const EXACT_LIMIT: f64 = 9.0e15;
    if n < EXACT_LIMIT {
        let mut k = n.ceil() as u64;
        while k > TABLE_HALF_STEPS as u64 + 1 && ln_survival((k - 1) as f64) < ln_v {
            k -= 1;
        }
        while ln_survival(k as f64) >= ln_v {
            k += 1;
        }
        k as u128
    } else {
        n.ceil() as u128
    }
}

/// One draw of `R_1` from the shared exact sampler.
pub fn sample_first_return<R: Rng + ?Sized>(rng: &mut R) -> u128 {
    FirstReturnSampler::shared().sample(rng)
}

/// `R_n`, the sum of `n` independent first-return draws.
pub fn sample_r_n<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<u128, ToyError> {
    if n == 0 {
        return Err(ToyError::InvalidConfig("n must be positive".into()));
    }
    let sampler = FirstReturnSampler::shared();
    let mut total: u128 = 0;
    for completed in 0..n {
        total = total
            .checked_add(sampler.sample(rng))
            .ok_or(ToyError::Overflow { completed })?;
    }
    Ok(total)
}

/// Step-by-step walk from 0 until it first returns; `None` if it has not
/// returned within `step_cap` steps. Cross-validation oracle only.
pub fn simulate_walk_until_return<R: Rng + ?Sized>(rng: &mut R, step_cap: u64) -> Option<u64> {
    let mut pos: i64 = 0;
    let mut t: u64 = 0;
    loop {
        let mut bits: u64 = rng.random();
        for _ in 0..64 {
            if t >= step_cap {
                return None;
            }
            pos += if bits & 1 == 1 { 1 } else { -1 };
            bits >>= 1;
            t += 1;
            if pos == 0 {
                return Some(t);
            }
        }
    }
}

/// One realization of `τ_ε`, censored at `step_cap`.
pub fn sample_tau<R: Rng + ?Sized>(
    config: &ToyConfig,
    rng: &mut R,
    step_cap: u64,
) -> Result<TauSample, ToyError> {
    config.validate()?;
    if step_cap == 0 {
        return Err(ToyError::ZeroStepCap);
    }
    let sampler = FirstReturnSampler::shared();
    let cap = step_cap as u128;
    let censored = |t_count| TauSample { tau: step_cap, t_count, r_total: step_cap, censored: true };
    match config.mode {
        ToyMode::Idealized => {
            let geo = Geometric::new(config.hit_probability())
                .map_err(|e| ToyError::InvalidConfig(e.to_string()))?;
            // rand_distr counts failures before the first success.
            let t_count = geo.sample(rng) + 1;
            let mut total: u128 = 0;
            for _ in 0..t_count {
                total += sampler.sample(rng);
                if total > cap {
                    return Ok(censored(t_count));
                }
            }
            let tau = total as u64;
            Ok(TauSample { tau, t_count, r_total: tau, censored: false })
        }
        ToyMode::Faithful => {
            let d = config.dim as usize;
            let eps = config.eps;
            // Uniform on (0,1)^d conditioned on B(Y_0, ε) ⊂ (0,1)^d is uniform
            // on [ε, 1−ε]^d for both norms.
            let y0: Vec<f64> = (0..d).map(|_| eps + (1.0 - 2.0 * eps) * rng.random::<f64>()).collect();
            let mut y = vec![0.0; d];
            let mut total: u128 = 0;
            let mut t_count: u64 = 0;
            loop {
                total += sampler.sample(rng);
                t_count += 1;
                if total > cap {
                    return Ok(censored(t_count - 1));
                }
                for yi in y.iter_mut() {
                    *yi = rng.random::<f64>();
                }
                if in_ball(&y, &y0, eps, config.norm) {
                    let tau = total as u64;
                    return Ok(TauSample { tau, t_count, r_total: tau, censored: false });
                }
            }
        }
    }
}

fn in_ball(y: &[f64], center: &[f64], eps: f64, norm: BallNorm) -> bool {
    match norm {
        BallNorm::Max => y.iter().zip(center).all(|(a, b)| (a - b).abs() < eps),
        BallNorm::Euclidean => {
            y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < eps * eps
        }
    }
}

/// `n` samples of `τ_ε`; sample `i` uses stream `i` of `master`.
pub fn sample_tau_batch(
    config: &ToyConfig,
    master: u64,
    n: usize,
    step_cap: u64,
) -> Result<Vec<TauSample>, ToyError> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_tau(config, &mut stream(master, i), step_cap))
        .collect()
}

/// `n` samples of `R_m`; sample `i` uses stream `i` of `master`.
pub fn sample_r_n_batch(m: u64, master: u64, n: usize) -> Result<Vec<u128>, ToyError> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_r_n(m, &mut stream(master, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentPoint {
    pub eps: f64,
    pub median_tau: f64,
    pub censored_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub points: Vec<ExponentPoint>,
    /// Fit of `log median τ_ε` against `−log ε`.
    pub regression: Regression,
}

/// Median `τ_ε` on each `eps` and the regression slope (target `2d`).
///
/// The stream family for the `j`-th `eps` is keyed by `derive_master(master, j)`.
pub fn exponent_experiment(
    base: &ToyConfig,
    eps_list: &[f64],
    n_samples: usize,
    step_cap: u64,
    master: u64,
) -> Result<ExponentFit, ToyError> {
    let mut points = Vec::with_capacity(eps_list.len());
    for (j, &eps) in eps_list.iter().enumerate() {
        let cfg = ToyConfig { eps, ..*base };
        cfg.validate()?;
        let samples = sample_tau_batch(&cfg, crate::rng::derive_master(master, j as u64), n_samples, step_cap)?;
        let mut taus: Vec<u64> = samples.iter().map(|s| s.tau).collect();
        taus.sort_unstable();
        let n_cens = samples.iter().filter(|s| s.censored).count();
        let mid = taus[(n_samples - 1) / 2];
        if mid >= step_cap && n_cens > 0 {
            return Err(ToyError::MedianCensored { eps });
        }
        points.push(ExponentPoint {
            eps,
            median_tau: mid as f64,
            censored_fraction: n_cens as f64 / n_samples as f64,
        });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (-p.eps.ln(), p.median_tau.ln())).collect();
    let regression = exponent_regression(&pairs)?;
    Ok(ExponentFit { points, regression })
}
