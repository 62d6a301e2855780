//! Monte Carlo return times for the skew product `T(x, l) = (θx, l + φ(x))`.
//!
//! A trajectory is a stationary two-sided realization of the chain: `s_0 ~ p`,
//! forward steps with `π`, backward steps with the reversed kernel
//! `π̃(v,u) = p(u)π(u,v)/p(v)`. The forward and backward halves draw from two
//! separate streams, `(master, 2i)` and `(master, 2i+1)`, so the realized
//! sequence does not depend on how far or in which order it is extended; the
//! same sample index therefore gives coupled return times for every `k`.
//!
//! `d(θⁿx, x) < e^{−k}` with `d(w, w') = e^{−m}`, `m` the largest integer with
//! `w_i = w'_i` for all `|i| < m`, holds iff `x_{n+i} = x_i` for all `|i| ≤ k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gibbs::{sample_row, GibbsError, GibbsMarkov, StepFunction};
use crate::rng::{stream, StreamRng};

/// Forward buffer length that triggers compaction.
const COMPACT_AT: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZextError {
    #[error("the chain has {0} states; simulation supports at most 256")]
    TooManyStates(usize),
    #[error("step cap must be positive")]
    ZeroStepCap,
    #[error("k must be positive")]
    ZeroRadius,
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error("sample {index}: no admissible start window after {attempts} attempts")]
    FilterExhausted { index: u64, attempts: u32 },
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
}

/// Model data shared read-only by all trajectories.
#[derive(Debug, Clone)]
pub struct ZExtension<'a> {
    g: &'a GibbsMarkov,
    step: &'a StepFunction,
    reversed: Vec<f64>,
    letters: Vec<u8>,
}

impl<'a> ZExtension<'a> {
    pub fn new(g: &'a GibbsMarkov, step: &'a StepFunction) -> Result<Self, ZextError> {
        let n = g.n_states();
        if n > 256 {
            return Err(ZextError::TooManyStates(n));
        }
        let letters = (0..n).map(|s| g.letter(s) as u8).collect();
        Ok(ZExtension { g, step, reversed: g.reversed_transitions(), letters })
    }

    pub fn gibbs(&self) -> &GibbsMarkov {
        self.g
    }

    pub fn step(&self) -> &StepFunction {
        self.step
    }

    /// Row `v` of the reversed kernel, a distribution over predecessors.
    pub fn reversed_row(&self, v: usize) -> &[f64] {
        let n = self.g.n_states();
        &self.reversed[v * n..(v + 1) * n]
    }

    /// Trajectory number `index` of the family keyed by `master`.
    pub fn trajectory(&self, master: u64, index: u64) -> TwoSidedTrajectory<'_> {
        TwoSidedTrajectory::new(self, stream(master, 2 * index), stream(master, 2 * index + 1))
    }
}

/// Lazily extended two-sided state sequence.
#[derive(Debug, Clone)]
pub struct TwoSidedTrajectory<'z> {
    z: &'z ZExtension<'z>,
    fwd: StreamRng,
    bwd: StreamRng,
    /// States at `base, base + 1, …`.
    forward: Vec<u8>,
    base: u64,
    /// States at `−1, −2, …`.
    backward: Vec<u8>,
}

impl<'z> TwoSidedTrajectory<'z> {
    fn new(z: &'z ZExtension<'z>, mut fwd: StreamRng, bwd: StreamRng) -> Self {
        let s0 = z.g.sample_stationary(&mut fwd) as u8;
        TwoSidedTrajectory { z, fwd, bwd, forward: vec![s0], base: 0, backward: Vec::new() }
    }

    /// Discard the current realization and draw a fresh one from the
    /// continuing streams (used for start-window rejection).
    pub fn redraw(&mut self) {
        self.forward.clear();
        self.backward.clear();
        self.base = 0;
        let s0 = self.z.g.sample_stationary(&mut self.fwd) as u8;
        self.forward.push(s0);
    }

    /// Chain state at index `i`; forward indices below the compaction point panic.
    #[inline]
    pub fn state(&mut self, i: i64) -> u8 {
        if i >= 0 {
            let off = (i as u64)
                .checked_sub(self.base)
                .expect("index precedes the compacted prefix") as usize;
            while self.forward.len() <= off {
                let last = *self.forward.last().expect("non-empty") as usize;
                let next = self.z.g.sample_next(last, &mut self.fwd) as u8;
                self.forward.push(next);
            }
            self.forward[off]
        } else {
            let off = (-i - 1) as usize;
            while self.backward.len() <= off {
                let after = match self.backward.last() {
                    Some(&s) => s as usize,
                    None => self.forward_origin() as usize,
                };
                let prev = sample_row(self.z.reversed_row(after), &mut self.bwd) as u8;
                self.backward.push(prev);
            }
            self.backward[off]
        }
    }

    fn forward_origin(&self) -> u8 {
        assert_eq!(self.base, 0, "origin compacted before the backward half was drawn");
        self.forward[0]
    }

    #[inline]
    pub fn letter(&mut self, i: i64) -> u8 {
        let s = self.state(i);
        self.z.letters[s as usize]
    }

    /// Letters `x_{−k} … x_k`.
    pub fn window(&mut self, k: usize) -> Vec<u8> {
        (-(k as i64)..=k as i64).map(|i| self.letter(i)).collect()
    }

    /// Drop forward states before `keep_from` (origin window must be saved).
    fn compact(&mut self, keep_from: u64) {
        if keep_from > self.base {
            let drop = (keep_from - self.base) as usize;
            self.forward.drain(..drop.min(self.forward.len() - 1));
            self.base += drop as u64;
        }
    }

    /// `ν(C_k(x))`, the measure of the cylinder `x_{−k..k}`.
    pub fn cylinder_prob(&mut self, k: usize) -> Result<f64, ZextError> {
        let w: Vec<usize> = self.window(k).into_iter().map(usize::from).collect();
        Ok(self.z.g.cylinder_measure(&w)?)
    }

    /// Letters and Birkhoff sums `S_0..=S_n` from a fresh scan (no compaction).
    pub fn birkhoff_sums(&mut self, n: u64) -> Vec<i64> {
        let mut sums = Vec::with_capacity(n as usize + 1);
        let mut s = 0i64;
        sums.push(0);
        for j in 0..n as i64 {
            let (a, b) = (self.state(j), self.state(j + 1));
            s += self.z.step.pair(a as usize, b as usize);
            sums.push(s);
        }
        sums
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub k: usize,
    /// Return time, or the cap when censored.
    pub tau: u64,
    pub cyl_prob: f64,
    pub censored: bool,
    pub cap: u64,
    /// Start windows drawn (1 unless a start filter rejected some).
    pub attempts: u32,
}

/// First `n ∈ [1, cap]` with matching `(2k+1)`-window (and `S_n = 0` when
/// `zero_sum`); `None` if censored. Only zeros of `S` are window-tested.
fn first_match(t: &mut TwoSidedTrajectory<'_>, k: usize, cap: u64, zero_sum: bool) -> Option<u64> {
    let origin = t.window(k);
    let ki = k as i64;
    let mut s = 0i64;
    let mut prev = t.state(0);
    for n in 1..=cap {
        let cur = t.state(n as i64);
        s += t.z.step.pair(prev as usize, cur as usize);
        prev = cur;
        if (!zero_sum || s == 0) && (-ki..=ki).all(|i| t.letter(n as i64 + i) == origin[(i + ki) as usize]) {
            return Some(n);
        }
        if t.forward.len() > COMPACT_AT {
            t.compact((n as i64 - ki - 1).max(0) as u64);
        }
    }
    None
}

/// `τ_ε` with `ε = e^{−k}`: least `n ≥ 1` with `S_n = 0` and `x_{n+i} = x_i` for `|i| ≤ k`.
pub fn tau_epsilon(t: &mut TwoSidedTrajectory<'_>, k: usize, step_cap: u64) -> Result<ReturnSample, ZextError> {
    sample_return(t, k, step_cap, true)
}

/// Cylinder return time `R_k`: least `n ≥ 1` with `x_{n+i} = x_i` for `|i| ≤ k`.
pub fn hirata_return(t: &mut TwoSidedTrajectory<'_>, k: usize, step_cap: u64) -> Result<ReturnSample, ZextError> {
    sample_return(t, k, step_cap, false)
}

fn sample_return(t: &mut TwoSidedTrajectory<'_>, k: usize, cap: u64, zero_sum: bool) -> Result<ReturnSample, ZextError> {
    if k == 0 {
        return Err(ZextError::ZeroRadius);
    }
    if cap == 0 {
        return Err(ZextError::ZeroStepCap);
    }
    let cyl_prob = t.cylinder_prob(k)?;
    let hit = first_match(t, k, cap, zero_sum);
    Ok(ReturnSample { k, tau: hit.unwrap_or(cap), cyl_prob, censored: hit.is_none(), cap, attempts: 1 })
}

/// Brute-force oracle: test every `n` for the window, then check `S_n = 0`.
pub fn tau_epsilon_bruteforce(t: &mut TwoSidedTrajectory<'_>, k: usize, cap: u64) -> Option<u64> {
    let origin = t.window(k);
    let sums = t.birkhoff_sums(cap);
    let ki = k as i64;
    (1..=cap).find(|&n| {
        let window_ok = (-ki..=ki).all(|i| t.letter(n as i64 + i) == origin[(i + ki) as usize]);
        window_ok && sums[n as usize] == 0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapPolicy {
    Fixed { cap: u64 },
    /// Per-sample cap `min(hard, ⌈(limit/ν(C_k))²⌉)`, so that `ν√τ` is
    /// observed up to `limit` whenever the hard cap does not bite.
    Scaled { limit: f64, hard: u64 },
}

impl CapPolicy {
    pub fn cap_for(&self, cyl_prob: f64) -> u64 {
        match *self {
            CapPolicy::Fixed { cap } => cap,
            CapPolicy::Scaled { limit, hard } => {
                let c = (limit / cyl_prob).powi(2).ceil();
                if c >= hard as f64 { hard } else { (c as u64).max(1) }
            }
        }
    }

    fn validate(&self) -> Result<(), ZextError> {
        match *self {
            CapPolicy::Fixed { cap: 0 } | CapPolicy::Scaled { hard: 0, .. } => Err(ZextError::ZeroStepCap),
            CapPolicy::Scaled { limit, .. } if !(limit > 0.0 && limit.is_finite()) => {
                Err(ZextError::InvalidConfig(format!("cap limit must be positive, got {limit}")))
            }
            _ => Ok(()),
        }
    }
}

/// Start-window admission rule; rejected windows are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StartFilter {
    /// Reject windows `x_{−k..k}` having a period `p < min_period`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_period: Option<usize>,
    /// Reject windows with `ν(C_k) < min_cyl_prob`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_cyl_prob: Option<f64>,
}

impl StartFilter {
    pub fn is_active(&self) -> bool {
        self.min_period.is_some() || self.min_cyl_prob.is_some()
    }

    pub fn admits(&self, window: &[u8], cyl_prob: f64) -> bool {
        if self.min_cyl_prob.is_some_and(|m| cyl_prob < m) {
            return false;
        }
        match self.min_period {
            Some(m) => smallest_period(window) >= m,
            None => true,
        }
    }
}

/// Smallest `p ≥ 1` with `w_{i+p} = w_i` for all valid `i` (`w.len()` if none).
pub fn smallest_period(w: &[u8]) -> usize {
    (1..w.len()).find(|&p| (0..w.len() - p).all(|i| w[i] == w[i + p])).unwrap_or(w.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    /// Joint return in base and fibre, `τ_ε`.
    Tau,
    /// Base-only cylinder return, `R_k`.
    Hirata,
}

/// Start-window draws per sample before giving up.
pub const MAX_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ReturnKind,
    pub k_list: Vec<usize>,
    pub n_samples: usize,
    pub cap: CapPolicy,
    #[serde(default)]
    pub filter: StartFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTable {
    pub k: usize,
    pub samples: Vec<ReturnSample>,
    pub censored_fraction: f64,
    /// Rejected start windows over all windows drawn.
    pub rejected_fraction: f64,
}

/// Draw one sample for sample index `index` at radius `k`.
pub fn sample_indexed(
    z: &ZExtension<'_>,
    cfg: &ExperimentConfig,
    k: usize,
    master: u64,
    index: u64,
) -> Result<ReturnSample, ZextError> {
    let mut t = z.trajectory(master, index);
    let mut attempts = 1;
    if cfg.filter.is_active() {
        loop {
            let w = t.window(k);
            let p = t.cylinder_prob(k)?;
            if cfg.filter.admits(&w, p) {
                break;
            }
            if attempts >= MAX_ATTEMPTS {
                return Err(ZextError::FilterExhausted { index, attempts });
            }
            attempts += 1;
            t.redraw();
        }
    }
    let cyl = t.cylinder_prob(k)?;
    let cap = cfg.cap.cap_for(cyl);
    let mut s = sample_return(&mut t, k, cap, cfg.kind == ReturnKind::Tau)?;
    s.attempts = attempts;
    Ok(s)
}

/// Parallel batch driver. Sample `i` at every `k` reuses trajectory `i`, and
/// results are ordered by index, so output is independent of scheduling.
pub fn run_tau_experiment(z: &ZExtension<'_>, cfg: &ExperimentConfig, master: u64) -> Result<Vec<KTable>, ZextError> {
    cfg.cap.validate()?;
    if cfg.k_list.is_empty() || cfg.k_list.contains(&0) {
        return Err(ZextError::InvalidConfig("k_list must be non-empty with positive entries".into()));
    }
    if cfg.n_samples == 0 {
        return Err(ZextError::InvalidConfig("n_samples must be positive".into()));
    }
    cfg.k_list
        .iter()
        .map(|&k| {
            let samples: Vec<ReturnSample> = (0..cfg.n_samples as u64)
                .into_par_iter()
                .map(|i| sample_indexed(z, cfg, k, master, i))
                .collect::<Result<_, _>>()?;
            let n = samples.len() as f64;
            let censored = samples.iter().filter(|s| s.censored).count() as f64;
            let drawn: u64 = samples.iter().map(|s| s.attempts as u64).sum();
            Ok(KTable {
                k,
                censored_fraction: censored / n,
                rejected_fraction: 1.0 - n / drawn as f64,
                samples,
            })
        })
        .collect()
}

impl KTable {
    /// Lower median of `τ`, treating censored samples as `+∞`. `None` when
    /// the median itself is censored or some censored sample had a cap below
    /// it (its true value could then lie on either side).
    pub fn median_tau(&self) -> Option<u64> {
        let mut t: Vec<u64> = self.samples.iter().map(|s| if s.censored { u64::MAX } else { s.tau }).collect();
        t.sort_unstable();
        let m = t[(t.len() - 1) / 2];
        let valid = m != u64::MAX && self.samples.iter().all(|s| !s.censored || s.cap >= m);
        valid.then_some(m)
    }

    /// `ν(C_k)√τ` per sample, and the smallest value at which any sample
    /// could have been censored.
    pub fn scaled_returns(&self, exponent: f64) -> (Vec<f64>, f64) {
        let vals = self.samples.iter().map(|s| s.cyl_prob * (s.tau as f64).powf(exponent)).collect();
        let threshold = self
            .samples
            .iter()
            .map(|s| s.cyl_prob * (s.cap as f64).powf(exponent))
            .fold(f64::INFINITY, f64::min);
        (vals, threshold)
    }
}

/// `(log√τ − k·d)/√k` for uncensored samples.
pub fn fluctuation_values(table: &KTable, dimension: f64) -> Vec<f64> {
    let k = table.k as f64;
    table
        .samples
        .iter()
        .filter(|s| !s.censored)
        .map(|s| (0.5 * (s.tau as f64).ln() - k * dimension) / k.sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::preset;

    #[test]
    fn smallest_period_examples() {
        assert_eq!(smallest_period(&[2, 2, 2, 2, 2]), 1);
        assert_eq!(smallest_period(&[0, 1, 0, 1, 0]), 2);
        assert_eq!(smallest_period(&[2, 2, 0, 2, 2]), 3);
        assert_eq!(smallest_period(&[0, 1, 2]), 3);
    }

    #[test]
    fn trajectory_is_access_order_independent() {
        let m = preset("golden-markov").unwrap().build().unwrap();
        let z = ZExtension::new(&m.gibbs, m.step.as_ref().unwrap()).unwrap();
        let mut a = z.trajectory(5, 3);
        let mut b = z.trajectory(5, 3);
        let xa: Vec<u8> = (-20..20).map(|i| a.state(i)).collect();
        let mut xb: Vec<u8> = (-20..20).rev().map(|i| b.state(i)).collect();
        xb.reverse();
        assert_eq!(xa, xb);
        for w in xa.windows(2) {
            assert!(m.spec.allowed(w[0] as usize, w[1] as usize));
        }
    }

    #[test]
    fn cap_policy() {
        let p = CapPolicy::Scaled { limit: 2.0, hard: 1000 };
        assert_eq!(p.cap_for(0.5), 16);
        assert_eq!(p.cap_for(1e-9), 1000);
        assert_eq!(CapPolicy::Fixed { cap: 7 }.cap_for(0.1), 7);
    }

    #[test]
    fn zero_arguments_rejected() {
        let m = preset("lazy-walk").unwrap().build().unwrap();
        let z = ZExtension::new(&m.gibbs, m.step.as_ref().unwrap()).unwrap();
        let mut t = z.trajectory(0, 0);
        assert_eq!(tau_epsilon(&mut t, 0, 10), Err(ZextError::ZeroRadius));
        assert_eq!(tau_epsilon(&mut t, 1, 0), Err(ZextError::ZeroStepCap));
    }

    #[test]
    fn compaction_keeps_results() {
        // Long scan that forces compaction: identical to a run without it.
        let m = preset("uniform-pm1").unwrap().build().unwrap();
        let z = ZExtension::new(&m.gibbs, m.step.as_ref().unwrap()).unwrap();
        let mut found = 0;
        for i in 0..40 {
            let mut a = z.trajectory(1, i);
            let ra = hirata_return(&mut a, 11, 3 * COMPACT_AT as u64).unwrap();
            let mut b = z.trajectory(1, i);
            let origin = b.window(11);
            let rb = (1..=3 * COMPACT_AT as u64)
                .find(|&n| (-11i64..=11).all(|j| b.letter(n as i64 + j) == origin[(j + 11) as usize]));
            assert_eq!(ra.censored, rb.is_none());
            if let Some(n) = rb {
                assert_eq!(ra.tau, n);
                if n > COMPACT_AT as u64 {
                    found += 1;
                }
            }
        }
        assert!(found > 0, "no sample exercised compaction");
    }
}
