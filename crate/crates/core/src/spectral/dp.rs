//! Exact probabilities of `{S_n = 0}` intersected with cylinder constraints,
//! by dynamic programming over (chain state, partial sum).
//!
//! Positions are letter indices of the two-sided sequence; the partial sum is
//! `S_j = Σ_{i<j} φ(x_i …)` counted from position 0. A state at position `j`
//! is the block `x_j … x_{j+b−1}`, so `φ(x_j …) = φ(s_j, s_{j+1})`. Since the
//! walk must end at 0 after `n` steps, only sums with
//! `|S_j| ≤ min(j, n − j)·max|φ|` can contribute and the rest are dropped
//! exactly. Each cell is a pull-form sum over predecessor states,
//! accumulated with Kahan compensation.

use serde::{Deserialize, Serialize};

use super::{green_kubo_variance, nonarithmeticity_scan, SpectralError};
use crate::gibbs::{GibbsMarkov, StepFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpOptions {
    /// Maximum number of (state, sum) cells in one layer.
    pub budget: u128,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions { budget: 20_000_000 }
    }
}

/// `{S_n = 0}` together with letter constraints `x_{start + i} = word[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnEvent {
    pub n: usize,
    pub constraints: Vec<(i64, Vec<usize>)>,
}

impl ReturnEvent {
    /// `{S_n = 0}` alone.
    pub fn marginal(n: usize) -> Self {
        ReturnEvent { n, constraints: Vec::new() }
    }

    /// `A ∩ {S_n = 0} ∩ {x_{n−k+i} = b_i}` with `A` the centred cylinder
    /// `x_{−k..k} = a` (`a` of odd length `2k + 1`).
    pub fn cylinder_return(a: &[usize], b: &[usize], n: usize) -> Result<Self, SpectralError> {
        if a.len().is_multiple_of(2) {
            return Err(SpectralError::InvalidArgument("centred cylinder needs odd length".into()));
        }
        let k = (a.len() / 2) as i64;
        Ok(ReturnEvent { n, constraints: vec![(-k, a.to_vec()), (n as i64 - k, b.to_vec())] })
    }

    /// `A ∩ {S_n = 0}` with `A` anchored at position 0.
    pub fn starting_in(a: &[usize], n: usize) -> Self {
        ReturnEvent { n, constraints: vec![(0, a.to_vec())] }
    }
}

struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn new() -> Self {
        Kahan { sum: 0.0, c: 0.0 }
    }

    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `ν(event)` computed exactly up to floating-point rounding.
pub fn exact_return_probability(
    g: &GibbsMarkov,
    step: &StepFunction,
    event: &ReturnEvent,
    opts: &DpOptions,
) -> Result<f64, SpectralError> {
    let n = event.n as i64;
    let nst = g.n_states();
    let blk = g.code().block() as i64;
    let alphabet = g.base().alphabet_size();
    for (_, w) in &event.constraints {
        if w.iter().any(|&s| s >= alphabet) {
            return Err(SpectralError::InvalidArgument(format!("word {w:?} uses unknown letters")));
        }
    }
    let first = event.constraints.iter().map(|c| c.0).min().unwrap_or(0).min(0);
    let last_letter = event
        .constraints
        .iter()
        .filter(|c| !c.1.is_empty())
        .map(|c| c.0 + c.1.len() as i64 - 1)
        .max()
        .unwrap_or(0);
    let last = n.max(last_letter - blk + 1);

    // Letter required at each constrained position (None = free, Err = conflict).
    let span = (last + blk - first) as usize;
    let mut required: Vec<Option<usize>> = vec![None; span];
    for (start, w) in &event.constraints {
        for (i, &s) in w.iter().enumerate() {
            let pos = (start + i as i64 - first) as usize;
            match required[pos] {
                Some(prev) if prev != s => return Ok(0.0),
                _ => required[pos] = Some(s),
            }
        }
    }
    let ok = |s: usize, pos: i64| -> bool {
        let word = g.code().state_word(s);
        word.iter().enumerate().all(|(i, &letter)| {
            required[(pos + i as i64 - first) as usize].is_none_or(|r| r == letter)
        })
    };

    let m = step.max_abs();
    let radius = |j: i64| -> i64 { j.min(n - j).max(0) * m };
    let peak = (nst as u128) * (2 * ((n / 2) as u128) * (m as u128) + 1);
    if peak > opts.budget {
        return Err(SpectralError::DpBudget { required: peak, limit: opts.budget });
    }

    // Phase 1: positions `first..0`, no sum yet.
    let mut dist: Vec<f64> = (0..nst).map(|s| if ok(s, first) { g.stationary()[s] } else { 0.0 }).collect();
    let propagate_free = |dist: &[f64], pos: i64| -> Vec<f64> {
        (0..nst)
            .map(|t| {
                if !ok(t, pos) {
                    return 0.0;
                }
                let mut acc = Kahan::new();
                for (u, &d) in dist.iter().enumerate() {
                    if d != 0.0 {
                        acc.add(d * g.transition(u, t));
                    }
                }
                acc.sum
            })
            .collect()
    };
    for pos in first + 1..=0 {
        dist = propagate_free(&dist, pos);
    }

    // Phase 2: positions 0..=n with partial sums in [−R_j, R_j].
    let mut r_cur = 0i64;
    let mut layer: Vec<f64> = dist.clone(); // width 1 at j = 0
    for j in 0..n {
        let r_next = radius(j + 1);
        let w_cur = (2 * r_cur + 1) as usize;
        let w_next = (2 * r_next + 1) as usize;
        let mut next = vec![0.0; nst * w_next];
        for t in 0..nst {
            if !ok(t, j + 1) {
                continue;
            }
            for si in 0..w_next {
                let s = si as i64 - r_next;
                let mut acc = Kahan::new();
                for u in 0..nst {
                    let q = g.transition(u, t);
                    if q == 0.0 {
                        continue;
                    }
                    let prev = s - step.pair(u, t);
                    if prev.abs() > r_cur {
                        continue;
                    }
                    let d = layer[u * w_cur + (prev + r_cur) as usize];
                    if d != 0.0 {
                        acc.add(d * q);
                    }
                }
                next[t * w_next + si] = acc.sum;
            }
        }
        layer = next;
        r_cur = r_next;
    }
    // R_n = 0, so `layer` now holds the mass with S_n = 0 per state.
    dist = layer;

    // Phase 3: remaining constrained positions.
    for pos in n + 1..=last {
        dist = propagate_free(&dist, pos);
    }
    let mut total = Kahan::new();
    for &d in &dist {
        total.add(d);
    }
    Ok(total.sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LltRow {
    pub n: usize,
    pub probability: f64,
    /// `P(S_n = 0)·σ_φ√(2πn)/period`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LltTable {
    pub sigma2: f64,
    /// Lattice span of `S_n` in the arithmetic case.
    pub period: Option<u64>,
    pub rows: Vec<LltRow>,
    /// Requested `n` that are not multiples of the period.
    pub skipped: Vec<usize>,
}

/// Exact `P(S_n = 0)` and its local-CLT normalization for each `n`.
pub fn llt_lattice_check(
    g: &GibbsMarkov,
    step: &StepFunction,
    n_list: &[usize],
    opts: &DpOptions,
) -> Result<LltTable, SpectralError> {
    let sigma2 = green_kubo_variance(g, step)?;
    let scan = nonarithmeticity_scan(g, step, 256)?;
    let period = if scan.nonarithmetic { None } else { scan.period };
    if !scan.nonarithmetic && period.is_none() {
        return Err(SpectralError::InvalidArgument(format!(
            "radius reaches 1 at u = {:?}, which is not 2π/integer",
            scan.offending_u
        )));
    }
    let p = period.unwrap_or(1) as usize;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &n in n_list {
        if n % p != 0 || n == 0 {
            skipped.push(n);
            continue;
        }
        let probability = exact_return_probability(g, step, &ReturnEvent::marginal(n), opts)?;
        let ratio = probability * (sigma2 * 2.0 * std::f64::consts::PI * n as f64).sqrt() / p as f64;
        rows.push(LltRow { n, probability, ratio });
    }
    Ok(LltTable { sigma2, period, rows, skipped })
}

/// `P·σ_φ√(2πn)/(ν(A)ν(B))` for a cylinder return event.
pub fn cylinder_ratio(
    g: &GibbsMarkov,
    step: &StepFunction,
    a: &[usize],
    b: &[usize],
    n: usize,
    opts: &DpOptions,
) -> Result<f64, SpectralError> {
    let sigma2 = green_kubo_variance(g, step)?;
    let p = exact_return_probability(g, step, &ReturnEvent::cylinder_return(a, b, n)?, opts)?;
    let na = g.cylinder_measure(a)?;
    let nb = g.cylinder_measure(b)?;
    Ok(p * (sigma2 * 2.0 * std::f64::consts::PI * n as f64).sqrt() / (na * nb))
}
