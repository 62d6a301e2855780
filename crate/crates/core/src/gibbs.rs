//! Subshifts of finite type with Gibbs–Markov measures.
//!
//! A locally constant potential `h` of depth `m` (a function of the word
//! `x_0 … x_{m−1}`) is encoded on the higher-block chain whose states are the
//! allowed words of length `b = max(m, 2) − 1`. There it is a function of a
//! pair of consecutive states, the transfer operator is the finite matrix
//! `L(u,v) = M(u,v)·e^{h(u,v)}`, and the equilibrium state is the stationary
//! Markov chain
//!
//! ```text
//! π(u,v) = L(u,v) r(v) / (λ r(u)),    p(u) = l(u) r(u) / ⟨l, r⟩
//! ```
//!
//! with `λ` the Perron root and `l`, `r` the left/right Perron vectors. The
//! pressure is divided out, so `log ν[w] = log p(w_0) + Σ log π(w_i, w_{i+1})`
//! with Gibbs constant exactly 1.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::open_unit;

/// Power-iteration tolerance on the ∞-norm change of the normalized vector.
pub const PERRON_TOL: f64 = 1e-14;
/// Power-iteration budget.
pub const PERRON_MAX_ITER: usize = 1_000_000;
/// Largest admissible `|∫φ dν|`.
pub const MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error("invalid transition matrix: {0}")]
    InvalidSpec(String),
    #[error("transition matrix is not irreducible")]
    Reducible,
    #[error("transition matrix is irreducible but periodic with period {0}")]
    Periodic(u64),
    #[error("invalid word table: {0}")]
    InvalidTable(String),
    #[error("word {0:?} is not allowed by the transition matrix")]
    DisallowedWord(Vec<usize>),
    #[error("Perron iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("step function is not centered: ∫φ dν = {residual:e}")]
    NotCentered { residual: f64 },
    #[error("step depth {step} exceeds the chain's word depth {chain}; build the measure at depth {step}")]
    DepthTooLarge { step: usize, chain: usize },
}

/// Alphabet `{0, …, A−1}` with a 0/1 transition matrix that is primitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubshiftSpec {
    alphabet_size: usize,
    transition: Vec<Vec<bool>>,
    primitivity_exponent: u32,
}

impl SubshiftSpec {
    /// Validate a square 0/1 matrix and certify primitivity.
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, GibbsError> {
        let a = rows.len();
        if a == 0 {
            return Err(GibbsError::InvalidSpec("empty alphabet".into()));
        }
        let mut transition = Vec::with_capacity(a);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != a {
                return Err(GibbsError::InvalidSpec(format!(
                    "row {i} has length {}, expected {a}",
                    row.len()
                )));
            }
            let mut r = Vec::with_capacity(a);
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => r.push(false),
                    1 => r.push(true),
                    _ => {
                        return Err(GibbsError::InvalidSpec(format!(
                            "entry ({i},{j}) is {v}, expected 0 or 1"
                        )))
                    }
                }
            }
            transition.push(r);
        }
        Self::from_bool(transition)
    }

    fn from_bool(transition: Vec<Vec<bool>>) -> Result<Self, GibbsError> {
        let a = transition.len();
        for i in 0..a {
            if !transition[i].iter().any(|&x| x) {
                return Err(GibbsError::InvalidSpec(format!("row {i} has no allowed successor")));
            }
            if !(0..a).any(|j| transition[j][i]) {
                return Err(GibbsError::InvalidSpec(format!("column {i} has no allowed predecessor")));
            }
        }
        let primitivity_exponent = primitivity_exponent(&transition)?;
        Ok(SubshiftSpec { alphabet_size: a, transition, primitivity_exponent })
    }

    /// Full shift on `a` symbols.
    pub fn full(a: usize) -> Self {
        Self::from_bool(vec![vec![true; a]; a]).expect("full shift is primitive")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Minimal `n₀` with `M^{n₀} > 0` entrywise.
    pub fn primitivity_exponent(&self) -> u32 {
        self.primitivity_exponent
    }

    pub fn allowed(&self, a: usize, b: usize) -> bool {
        self.transition[a][b]
    }

    pub fn transition_rows(&self) -> Vec<Vec<u8>> {
        self.transition.iter().map(|r| r.iter().map(|&x| x as u8).collect()).collect()
    }

    pub fn word_allowed(&self, w: &[usize]) -> bool {
        w.iter().all(|&s| s < self.alphabet_size) && w.windows(2).all(|p| self.transition[p[0]][p[1]])
    }

    /// All allowed words of length `len`, in lexicographic order.
    pub fn allowed_words(&self, len: usize) -> Vec<Vec<usize>> {
        if len == 0 {
            return vec![vec![]];
        }
        let mut words: Vec<Vec<usize>> = (0..self.alphabet_size).map(|s| vec![s]).collect();
        for _ in 1..len {
            let mut next = Vec::new();
            for w in &words {
                let last = *w.last().expect("non-empty");
                for s in 0..self.alphabet_size {
                    if self.transition[last][s] {
                        let mut v = w.clone();
                        v.push(s);
                        next.push(v);
                    }
                }
            }
            words = next;
        }
        words
    }
}

/// Irreducibility and aperiodicity by graph search, then the exponent by
/// boolean powers (bounded by Wielandt's `(A−1)² + 1`).
fn primitivity_exponent(m: &[Vec<bool>]) -> Result<u32, GibbsError> {
    let a = m.len();
    let reach = |forward: bool| -> Vec<Option<u64>> {
        let mut level = vec![None; a];
        level[0] = Some(0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..a {
                let edge = if forward { m[u][v] } else { m[v][u] };
                if edge && level[v].is_none() {
                    level[v] = Some(level[u].expect("visited") + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let fwd = reach(true);
    if fwd.iter().any(|l| l.is_none()) || reach(false).iter().any(|l| l.is_none()) {
        return Err(GibbsError::Reducible);
    }
    let mut period: u64 = 0;
    for u in 0..a {
        for v in 0..a {
            if m[u][v] {
                let (lu, lv) = (fwd[u].expect("reached") as i64, fwd[v].expect("reached") as i64);
                period = gcd(period, (lu + 1 - lv).unsigned_abs());
            }
        }
    }
    if period != 1 {
        return Err(GibbsError::Periodic(period));
    }
    let words = a.div_ceil(64);
    let to_bits = |rows: &[Vec<bool>]| -> Vec<Vec<u64>> {
        rows.iter()
            .map(|r| {
                let mut b = vec![0u64; words];
                for (j, &x) in r.iter().enumerate() {
                    if x {
                        b[j / 64] |= 1 << (j % 64);
                    }
                }
                b
            })
            .collect()
    };
    let base = to_bits(m);
    let mut power = base.clone();
    let full = |p: &Vec<Vec<u64>>| {
        p.iter().all(|row| (0..a).all(|j| row[j / 64] >> (j % 64) & 1 == 1))
    };
    let bound = ((a - 1) * (a - 1) + 1) as u32;
    for n in 1..=bound {
        if full(&power) {
            return Ok(n);
        }
        let mut next = vec![vec![0u64; words]; a];
        for i in 0..a {
            for k in 0..a {
                if power[i][k / 64] >> (k % 64) & 1 == 1 {
                    for w in 0..words {
                        next[i][w] |= base[k][w];
                    }
                }
            }
        }
        power = next;
    }
    unreachable!("irreducible aperiodic matrices are primitive within the Wielandt bound")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Values indexed by the allowed words of a fixed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTable<T> {
    depth: usize,
    entries: BTreeMap<Vec<usize>, T>,
}

impl<T: Clone> WordTable<T> {
    /// The table must cover exactly the allowed words of length `depth`.
    pub fn new(spec: &SubshiftSpec, depth: usize, entries: BTreeMap<Vec<usize>, T>) -> Result<Self, GibbsError> {
        if depth == 0 {
            return Err(GibbsError::InvalidTable("depth must be positive".into()));
        }
        for w in entries.keys() {
            if w.len() != depth {
                return Err(GibbsError::InvalidTable(format!(
                    "word {w:?} has length {}, expected {depth}",
                    w.len()
                )));
            }
            if !spec.word_allowed(w) {
                return Err(GibbsError::DisallowedWord(w.clone()));
            }
        }
        let allowed = spec.allowed_words(depth);
        if let Some(w) = allowed.iter().find(|w| !entries.contains_key(*w)) {
            return Err(GibbsError::InvalidTable(format!("missing value for allowed word {w:?}")));
        }
        Ok(WordTable { depth, entries })
    }

    /// Table from a function on allowed words.
    pub fn from_fn(spec: &SubshiftSpec, depth: usize, f: impl Fn(&[usize]) -> T) -> Self {
        let entries = spec.allowed_words(depth).into_iter().map(|w| { let v = f(&w); (w, v) }).collect();
        WordTable { depth, entries }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn get(&self, w: &[usize]) -> Option<&T> {
        self.entries.get(w)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &T)> {
        self.entries.iter()
    }

    /// Value at the prefix of length `depth` of a longer word.
    pub fn at_prefix(&self, w: &[usize]) -> Option<&T> {
        w.get(..self.depth).and_then(|p| self.entries.get(p))
    }
}

pub type Potential = WordTable<f64>;

/// Higher-block presentation: states are the allowed words of length `block`,
/// and `u → v` iff `u[1..] = v[..block−1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCode {
    block: usize,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    chain: SubshiftSpec,
}

impl BlockCode {
    pub fn new(spec: &SubshiftSpec, block: usize) -> Result<Self, GibbsError> {
        if block == 0 {
            return Err(GibbsError::InvalidTable("block length must be positive".into()));
        }
        let states = spec.allowed_words(block);
        let index: HashMap<Vec<usize>, usize> =
            states.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let chain = if block == 1 {
            spec.clone()
        } else {
            let n = states.len();
            let mut t = vec![vec![false; n]; n];
            for (i, u) in states.iter().enumerate() {
                for (j, v) in states.iter().enumerate() {
                    t[i][j] = u[1..] == v[..block - 1] && spec.allowed(u[block - 1], v[block - 1]);
                }
            }
            SubshiftSpec::from_bool(t)?
        };
        Ok(BlockCode { block, states, index, chain })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_word(&self, s: usize) -> &[usize] {
        &self.states[s]
    }

    pub fn state_index(&self, w: &[usize]) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// The transition structure between states.
    pub fn chain(&self) -> &SubshiftSpec {
        &self.chain
    }

    /// State sequence of a word of length `≥ block`.
    pub fn encode(&self, w: &[usize]) -> Result<Vec<usize>, GibbsError> {
        if w.len() < self.block {
            return Err(GibbsError::InvalidTable(format!(
                "word of length {} is shorter than the block length {}",
                w.len(),
                self.block
            )));
        }
        w.windows(self.block)
            .map(|b| self.state_index(b).ok_or_else(|| GibbsError::DisallowedWord(w.to_vec())))
            .collect()
    }

    /// The word `u ++ v.last` spelled by a consecutive state pair.
    pub fn pair_word(&self, u: usize, v: usize) -> Vec<usize> {
        let mut w = self.states[u].clone();
        w.push(*self.states[v].last().expect("non-empty state"));
        w
    }

    /// Transport a table of depth `≤ block + 1` to a depth-2 table on states.
    pub fn transport<T: Clone>(&self, table: &WordTable<T>) -> Result<WordTable<T>, GibbsError> {
        if table.depth() > self.block + 1 {
            return Err(GibbsError::DepthTooLarge { step: table.depth(), chain: self.block + 1 });
        }
        let mut entries = BTreeMap::new();
        let n = self.n_states();
        for u in 0..n {
            for v in 0..n {
                if self.chain.allowed(u, v) {
                    let w = self.pair_word(u, v);
                    let val = table.at_prefix(&w).ok_or_else(|| GibbsError::DisallowedWord(w.clone()))?;
                    entries.insert(vec![u, v], val.clone());
                }
            }
        }
        WordTable::new(&self.chain, 2, entries)
    }
}

/// Higher-block recoding of a depth-`m` table (`m ≥ 3`) to a depth-2 table
/// on the `(m−1)`-block chain; depth ≤ 2 tables are returned unchanged.
pub fn recode_to_depth2<T: Clone>(
    spec: &SubshiftSpec,
    table: &WordTable<T>,
) -> Result<(BlockCode, WordTable<T>), GibbsError> {
    if table.depth() <= 2 {
        let code = BlockCode::new(spec, 1)?;
        let t = if table.depth() == 2 { table.clone() } else { code.transport(table)? };
        return Ok((code, t));
    }
    let code = BlockCode::new(spec, table.depth() - 1)?;
    let t = code.transport(table)?;
    Ok((code, t))
}

/// Stationary Markov measure of a locally constant potential.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsMarkov {
    base: SubshiftSpec,
    code: BlockCode,
    stationary: Vec<f64>,
    /// Row-major `n × n` stochastic matrix on states.
    transitions: Vec<f64>,
    perron_value: f64,
    entropy: f64,
    iterations: usize,
}

impl GibbsMarkov {
    /// Equilibrium state of `pot` on the `(max(depth, m)−1)`-block chain.
    ///
    /// `depth` lets the chain resolve a step function deeper than the potential.
    pub fn build_at_depth(spec: &SubshiftSpec, pot: &Potential, depth: usize) -> Result<Self, GibbsError> {
        let depth = depth.max(pot.depth()).max(2);
        let code = BlockCode::new(spec, depth - 1)?;
        let h = code.transport(pot)?;
        let n = code.n_states();
        let mut l = vec![0.0; n * n];
        for (w, &v) in h.iter() {
            l[w[0] * n + w[1]] = v.exp();
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(GibbsError::InvalidTable("potential overflows exp".into()));
        }
        let (r, lambda, it_r) = perron_right(&l, n)?;
        let mut transitions = vec![0.0; n * n];
        for u in 0..n {
            let mut row_sum = 0.0;
            for v in 0..n {
                let x = l[u * n + v] * r[v] / (lambda * r[u]);
                transitions[u * n + v] = x;
                row_sum += x;
            }
            for v in 0..n {
                transitions[u * n + v] /= row_sum;
            }
        }
        // Left Perron vector of the stochastic matrix is l∘r/⟨l,r⟩.
        let (stationary, it_l) = stationary_vector(&transitions, n)?;
        let mut entropy = 0.0;
        for u in 0..n {
            for v in 0..n {
                let q = transitions[u * n + v];
                if q > 0.0 {
                    entropy -= stationary[u] * q * q.ln();
                }
            }
        }
        Ok(GibbsMarkov {
            base: spec.clone(),
            code,
            stationary,
            transitions,
            perron_value: lambda,
            entropy,
            iterations: it_r + it_l,
        })
    }

    pub fn build(spec: &SubshiftSpec, pot: &Potential) -> Result<Self, GibbsError> {
        Self::build_at_depth(spec, pot, 2)
    }

    pub fn base(&self) -> &SubshiftSpec {
        &self.base
    }

    pub fn code(&self) -> &BlockCode {
        &self.code
    }

    /// Number of chain states (letters when the block length is 1).
    pub fn n_states(&self) -> usize {
        self.code.n_states()
    }

    /// Longest word depth a pair of consecutive states determines.
    pub fn word_depth(&self) -> usize {
        self.code.block() + 1
    }

    /// First letter of a state.
    pub fn letter(&self, s: usize) -> usize {
        self.code.state_word(s)[0]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn transition(&self, u: usize, v: usize) -> f64 {
        self.transitions[u * self.n_states() + v]
    }

    pub fn transition_matrix(&self) -> &[f64] {
        &self.transitions
    }

    pub fn perron_value(&self) -> f64 {
        self.perron_value
    }

    /// Metric entropy `h_ν` in nats.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// `d = 2h_ν`.
    pub fn dimension(&self) -> f64 {
        2.0 * self.entropy
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `log π(u,v)`, `−∞` on forbidden pairs.
    pub fn normalized_potential(&self, u: usize, v: usize) -> f64 {
        self.transition(u, v).ln()
    }

    /// Time-reversed kernel `π̃(v,u) = p(u)π(u,v)/p(v)`, row-major in `v`.
    pub fn reversed_transitions(&self) -> Vec<f64> {
        let n = self.n_states();
        let mut rev = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                rev[v * n + u] = self.stationary[u] * self.transition(u, v) / self.stationary[v];
            }
        }
        rev
    }

    /// `‖pπ − p‖_∞`.
    pub fn stationarity_residual(&self) -> f64 {
        let n = self.n_states();
        (0..n)
            .map(|v| {
                let s: f64 = (0..n).map(|u| self.stationary[u] * self.transition(u, v)).sum();
                (s - self.stationary[v]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Asymptotic variance `σ_h²` of the information function `−log π(x_0, x_1)`.
    pub fn entropy_variance(&self) -> Result<f64, GibbsError> {
        let f: Vec<f64> = self
            .transitions
            .iter()
            .map(|&q| if q > 0.0 { -q.ln() } else { 0.0 })
            .collect();
        self.asymptotic_variance(&f)
    }

    /// Green–Kubo variance of `Y_j = f(s_j, s_{j+1})` for a pair function `f`
    /// (row-major `n × n`):
    ///
    /// `σ² = Var(Y_0) + 2 Σ_{j≥0} g·π^j·(h − μ)`, with `g(b) = Σ_a p(a)π(a,b)f(a,b)`,
    /// `h(c) = Σ_d π(c,d)f(c,d)` and `μ = Σ g`. The series is summed until the
    /// propagated vector falls below `10⁻¹⁷` relative to its start.
    pub fn asymptotic_variance(&self, f: &[f64]) -> Result<f64, GibbsError> {
        let n = self.n_states();
        assert_eq!(f.len(), n * n, "pair function must be n × n");
        let p = &self.stationary;
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut second = 0.0;
        for a in 0..n {
            for b in 0..n {
                let q = self.transition(a, b);
                if q > 0.0 {
                    let v = f[a * n + b];
                    g[b] += p[a] * q * v;
                    h[a] += q * v;
                    second += p[a] * q * v * v;
                }
            }
        }
        let mu: f64 = g.iter().sum();
        let mut v: Vec<f64> = h.iter().map(|x| x - mu).collect();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut series = 0.0;
        let mut next = vec![0.0; n];
        if scale > 0.0 {
            let mut converged = false;
            for _ in 0..PERRON_MAX_ITER {
                series += g.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
                for c in 0..n {
                    next[c] = (0..n).map(|d| self.transition(c, d) * v[d]).sum();
                }
                // π^j h̃ → (p·h̃)·1 = 0; remove the rounding-level constant
                // component so it cannot accumulate in the series.
                let drift: f64 = (0..n).map(|c| p[c] * next[c]).sum();
                for x in next.iter_mut() {
                    *x -= drift;
                }
                std::mem::swap(&mut v, &mut next);
                if v.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= 1e-17 * scale {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(GibbsError::NoConvergence(PERRON_MAX_ITER));
            }
        }
        Ok(second - mu * mu + 2.0 * series)
    }

    /// `ν[w]` for a word in the base alphabet; the anchor index is immaterial.
    pub fn cylinder_measure(&self, w: &[usize]) -> Result<f64, GibbsError> {
        Ok(self.log_cylinder_measure(w)?.exp())
    }

    pub fn log_cylinder_measure(&self, w: &[usize]) -> Result<f64, GibbsError> {
        if w.is_empty() {
            return Ok(0.0);
        }
        if !self.base.word_allowed(w) {
            return Err(GibbsError::DisallowedWord(w.to_vec()));
        }
        let b = self.code.block();
        if w.len() < b {
            let mass: f64 = (0..self.n_states())
                .filter(|&s| self.code.state_word(s).starts_with(w))
                .map(|s| self.stationary[s])
                .sum();
            return Ok(mass.ln());
        }
        let states = self.code.encode(w)?;
        let mut acc = self.stationary[states[0]].ln();
        for p in states.windows(2) {
            let q = self.transition(p[0], p[1]);
            if q == 0.0 {
                return Err(GibbsError::DisallowedWord(w.to_vec()));
            }
            acc += q.ln();
        }
        Ok(acc)
    }

    /// Draw the state at index 0 from `p`.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_row(&self.stationary, rng)
    }

    /// Draw the successor of state `u`.
    pub fn sample_next<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        let n = self.n_states();
        sample_row(&self.transitions[u * n..(u + 1) * n], rng)
    }

    /// A `ν`-distributed word of `len ≥ 1` base letters.
    pub fn sample_word<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let mut s = self.sample_stationary(rng);
        let mut w: Vec<usize> = Vec::with_capacity(len + self.code.block());
        w.extend_from_slice(self.code.state_word(s));
        while w.len() < len {
            s = self.sample_next(s, rng);
            w.push(*self.code.state_word(s).last().expect("non-empty"));
        }
        w.truncate(len);
        w
    }
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u = 1.0 - open_unit(rng);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &q) in row.iter().enumerate() {
        if q > 0.0 {
            acc += q;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn perron_right(l: &[f64], n: usize) -> Result<(Vec<f64>, f64, usize), GibbsError> {
    let mut r = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for it in 1..=PERRON_MAX_ITER {
        for u in 0..n {
            next[u] = (0..n).map(|v| l[u * n + v] * r[v]).sum();
        }
        let norm: f64 = next.iter().sum();
        let mut diff: f64 = 0.0;
        for u in 0..n {
            next[u] /= norm;
            diff = diff.max((next[u] - r[u]).abs());
        }
        std::mem::swap(&mut r, &mut next);
        if diff <= PERRON_TOL {
            // Rayleigh-type estimate with the converged vector.
            let lr: Vec<f64> = (0..n).map(|u| (0..n).map(|v| l[u * n + v] * r[v]).sum()).collect();
            let lambda = lr.iter().sum::<f64>() / r.iter().sum::<f64>();
            return Ok((r, lambda, it));
        }
    }
    Err(GibbsError::NoConvergence(PERRON_MAX_ITER))
}

fn stationary_vector(pi: &[f64], n: usize) -> Result<(Vec<f64>, usize), GibbsError> {
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for it in 1..=PERRON_MAX_ITER {
        for v in 0..n {
            next[v] = (0..n).map(|u| p[u] * pi[u * n + v]).sum();
        }
        let norm: f64 = next.iter().sum();
        let mut diff: f64 = 0.0;
        for v in 0..n {
            next[v] /= norm;
            diff = diff.max((next[v] - p[v]).abs());
        }
        std::mem::swap(&mut p, &mut next);
        if diff <= PERRON_TOL {
            return Ok((p, it));
        }
    }
    Err(GibbsError::NoConvergence(PERRON_MAX_ITER))
}

/// Integer observable `φ` of depth `m`, centered under `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    values: WordTable<i64>,
    /// `φ(u, v)` on consecutive chain states; 0 on forbidden pairs.
    pair: Vec<i64>,
    n_states: usize,
    mean_residual: f64,
}

impl StepFunction {
    /// Accept `values` iff `|∫φ dν| ≤ 10⁻¹²`; the residual is reported otherwise.
    pub fn new(g: &GibbsMarkov, values: WordTable<i64>) -> Result<Self, GibbsError> {
        let (pair, mean) = Self::encode(g, &values)?;
        if mean.abs() > MEAN_TOL {
            return Err(GibbsError::NotCentered { residual: mean });
        }
        Ok(StepFunction { values, pair, n_states: g.n_states(), mean_residual: mean })
    }

    fn encode(g: &GibbsMarkov, values: &WordTable<i64>) -> Result<(Vec<i64>, f64), GibbsError> {
        let t = g.code().transport(values)?;
        let n = g.n_states();
        let mut pair = vec![0i64; n * n];
        for (w, &v) in t.iter() {
            pair[w[0] * n + w[1]] = v;
        }
        let mut mean = 0.0;
        for u in 0..n {
            for v in 0..n {
                mean += g.stationary()[u] * g.transition(u, v) * pair[u * n + v] as f64;
            }
        }
        Ok((pair, mean))
    }

    /// `∫φ dν` without the centering check.
    pub fn mean_of(g: &GibbsMarkov, values: &WordTable<i64>) -> Result<f64, GibbsError> {
        Ok(Self::encode(g, values)?.1)
    }

    pub fn depth(&self) -> usize {
        self.values.depth()
    }

    pub fn values(&self) -> &WordTable<i64> {
        &self.values
    }

    pub fn mean_residual(&self) -> f64 {
        self.mean_residual
    }

    #[inline]
    pub fn pair(&self, u: usize, v: usize) -> i64 {
        self.pair[u * self.n_states + v]
    }

    pub fn pair_table(&self) -> &[i64] {
        &self.pair
    }

    pub fn max_abs(&self) -> i64 {
        self.pair.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// `φ` evaluated on a base word of length `≥ depth`, at its first position.
    pub fn eval(&self, w: &[usize]) -> Option<i64> {
        self.values.at_prefix(w).copied()
    }
}

/// Convenience: `build_gibbs` then `make_step_function` on a common chain.
pub fn build_model(
    spec: &SubshiftSpec,
    pot: &Potential,
    step: Option<WordTable<i64>>,
) -> Result<(GibbsMarkov, Option<StepFunction>), GibbsError> {
    let depth = step.as_ref().map_or(2, |s| s.depth());
    let g = GibbsMarkov::build_at_depth(spec, pot, depth)?;
    let step = step.map(|s| StepFunction::new(&g, s)).transpose()?;
    Ok((g, step))
}

/// Word table from a function of the first letter.
pub fn letter_table<T: Clone>(spec: &SubshiftSpec, f: impl Fn(usize) -> T) -> WordTable<T> {
    WordTable::from_fn(spec, 1, |w| f(w[0]))
}

/// Bernoulli potential `h(a, b) = log q(b)` on the full shift.
pub fn bernoulli_potential(q: &[f64]) -> (SubshiftSpec, Potential) {
    let spec = SubshiftSpec::full(q.len());
    let pot = WordTable::from_fn(&spec, 2, |w| q[w[1]].ln());
    (spec, pot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_shift() {
        let (spec, pot) = bernoulli_potential(&[0.5, 0.5]);
        let g = GibbsMarkov::build(&spec, &pot).unwrap();
        assert!((g.stationary()[0] - 0.5).abs() < 1e-15);
        assert!((g.transition(0, 1) - 0.5).abs() < 1e-15);
        assert!((g.entropy() - 2f64.ln()).abs() < 1e-14);
        assert!((g.dimension() - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!((g.perron_value() - 1.0).abs() < 1e-14);
        assert!((g.cylinder_measure(&[0, 1, 1]).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn golden_mean_parry_measure() {
        let spec = SubshiftSpec::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        assert_eq!(spec.primitivity_exponent(), 2);
        let pot = WordTable::from_fn(&spec, 2, |_| 0.0);
        let g = GibbsMarkov::build(&spec, &pot).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((g.perron_value() - phi).abs() < 1e-13);
        assert!((g.entropy() - phi.ln()).abs() < 1e-13);
        // p(a) = φ²/(1+φ²)
        assert!((g.stationary()[0] - phi * phi / (1.0 + phi * phi)).abs() < 1e-13);
        assert!(g.stationarity_residual() < 1e-14);
    }

    #[test]
    fn bernoulli_three_shift_entropy() {
        let q = [0.05, 0.05, 0.9];
        let (spec, pot) = bernoulli_potential(&q);
        let g = GibbsMarkov::build(&spec, &pot).unwrap();
        let h: f64 = -q.iter().map(|x| x * x.ln()).sum::<f64>();
        assert!((g.entropy() - h).abs() < 1e-14);
        assert!((g.entropy() - 0.39434).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(SubshiftSpec::new(vec![vec![0, 1], vec![1, 0]]), Err(GibbsError::Periodic(2))));
        assert!(matches!(SubshiftSpec::new(vec![vec![1, 1], vec![0, 1]]), Err(GibbsError::Reducible)));
        assert!(SubshiftSpec::new(vec![vec![1, 2], vec![1, 1]]).is_err());
        assert!(SubshiftSpec::new(vec![vec![1, 1]]).is_err());
        assert!(SubshiftSpec::new(vec![vec![0, 0], vec![1, 1]]).is_err());
    }

    #[test]
    fn wielandt_extremal_matrix() {
        // Wielandt's matrix attains the bound (A−1)² + 1.
        let a = 5;
        let mut m = vec![vec![0u8; a]; a];
        for i in 0..a - 1 {
            m[i][i + 1] = 1;
        }
        m[a - 1][0] = 1;
        m[a - 1][1] = 1;
        let spec = SubshiftSpec::new(m).unwrap();
        assert_eq!(spec.primitivity_exponent(), 17);
    }

    #[test]
    fn word_table_coverage_is_checked() {
        let spec = SubshiftSpec::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let mut e = BTreeMap::new();
        e.insert(vec![0, 0], 0.0);
        e.insert(vec![0, 1], 0.0);
        assert!(WordTable::new(&spec, 2, e.clone()).is_err());
        e.insert(vec![1, 0], 0.0);
        assert!(WordTable::new(&spec, 2, e.clone()).is_ok());
        e.insert(vec![1, 1], 0.0);
        assert!(matches!(WordTable::new(&spec, 2, e), Err(GibbsError::DisallowedWord(_))));
    }

    #[test]
    fn non_centered_step_rejected_with_residual() {
        let (spec, pot) = bernoulli_potential(&[0.9, 0.1]);
        let g = GibbsMarkov::build(&spec, &pot).unwrap();
        let step = letter_table(&spec, |a| if a == 0 { 1 } else { -1 });
        match StepFunction::new(&g, step) {
            Err(GibbsError::NotCentered { residual }) => assert!((residual - 0.8).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lazy_walk_step_accepted() {
        let (spec, pot) = bernoulli_potential(&[0.25, 0.25, 0.5]);
        let g = GibbsMarkov::build(&spec, &pot).unwrap();
        let step = letter_table(&spec, |a| [1, -1, 0][a]);
        let s = StepFunction::new(&g, step).unwrap();
        assert!(s.mean_residual().abs() < 1e-15);
        assert_eq!(s.pair(0, 2), 1);
        assert_eq!(s.max_abs(), 1);
    }

    #[test]
    fn recoding_preserves_entropy_and_cylinders() {
        let spec = SubshiftSpec::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let pot2 = WordTable::from_fn(&spec, 2, |_| 0.0);
        let g2 = GibbsMarkov::build(&spec, &pot2).unwrap();
        let pot3 = WordTable::from_fn(&spec, 3, |_| 0.0);
        let g3 = GibbsMarkov::build(&spec, &pot3).unwrap();
        assert_eq!(g3.n_states(), 3);
        assert!((g3.entropy() - g2.entropy()).abs() < 1e-13);
        for w in [vec![0, 1, 0, 0, 1], vec![0], vec![1, 0]] {
            let a = g2.cylinder_measure(&w).unwrap();
            let b = g3.cylinder_measure(&w).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "{w:?}");
        }
        let (code, t) = recode_to_depth2(&spec, &pot3).unwrap();
        assert_eq!(code.n_states(), 3);
        assert_eq!(t.depth(), 2);
        let (code1, t1) = recode_to_depth2(&spec, &pot2).unwrap();
        assert_eq!(code1.block(), 1);
        assert_eq!(t1, pot2);
    }

    #[test]
    fn disallowed_cylinder_is_error() {
        let spec = SubshiftSpec::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let g = GibbsMarkov::build(&spec, &WordTable::from_fn(&spec, 2, |_| 0.0)).unwrap();
        assert!(matches!(g.cylinder_measure(&[1, 1]), Err(GibbsError::DisallowedWord(_))));
    }
}
