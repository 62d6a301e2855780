//! Twisted transfer matrices `P_u(a,b) = π(a,b)·e^{iuφ(a,b)}` and their
//! leading eigenvalue curve `λ_u`.
//!
//! On the Markov chain the twisted operator acting on functions of the state
//! is the matrix above, so `E_a[e^{iuS_n}] = (P_u^n 1)(a)` and
//!
//! * `λ_0 = 1`, `λ'_0 = iE_ν[φ] = 0` for centered `φ`,
//! * `−λ''_0 = σ_φ²`, the Green–Kubo asymptotic variance,
//! * `ρ(P_u) < 1` for all `u ∈ (0, π]` unless `φ` is cohomologous to a
//!   lattice-valued function with a coarser span (the arithmetic case).

pub mod dp;

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gibbs::{GibbsError, GibbsMarkov, StepFunction};

pub use dp::{cylinder_ratio, exact_return_probability, llt_lattice_check, DpOptions, LltRow, LltTable, ReturnEvent};

/// Moduli closer than this make the dominant eigenvalue ambiguous.
pub const TIE_TOL: f64 = 1e-10;
/// Scan verdict margin: nonarithmetic iff `max ρ(P_u) ≤ 1 − δ`.
pub const DELTA_SCAN: f64 = 1e-6;
/// Required agreement between `−λ''(0)` and Green–Kubo (relative).
pub const SIGMA_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigenvalue iteration failed for u = {u}")]
    Eigen { u: f64 },
    #[error(
        "variance mismatch: −λ''(0) = {spectral:.12e} but Green–Kubo gives {green_kubo:.12e}; \
         the step function may violate the model assumptions"
    )]
    SigmaMismatch { spectral: f64, green_kubo: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("DP needs {required} state-sum cells, above the budget {limit}; use a smaller n or |φ|")]
    DpBudget { required: u128, limit: u128 },
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
}

/// `P_u` as a dense complex matrix over chain states.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedOperator {
    pub u: f64,
    pub matrix: DMatrix<Complex64>,
}

impl TwistedOperator {
    pub fn new(g: &GibbsMarkov, step: &StepFunction, u: f64) -> Self {
        let n = g.n_states();
        let matrix = DMatrix::from_fn(n, n, |a, b| {
            let q = g.transition(a, b);
            if q == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(q, u * step.pair(a, b) as f64)
            }
        });
        TwistedOperator { u, matrix }
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, SpectralError> {
        let n = self.matrix.nrows();
        if n == 1 {
            return Ok(vec![self.matrix[(0, 0)]]);
        }
        let schur = Schur::try_new(self.matrix.clone(), f64::EPSILON, 100_000)
            .ok_or(SpectralError::Eigen { u: self.u })?;
        let ev = schur.eigenvalues().ok_or(SpectralError::Eigen { u: self.u })?;
        Ok(ev.iter().copied().collect())
    }
}

/// Dominant eigenvalue, or only the spectral radius when it is not unique.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingEigenvalue {
    pub u: f64,
    /// `None` when the two largest moduli are within [`TIE_TOL`].
    pub value: Option<(f64, f64)>,
    pub radius: f64,
    /// `|λ_1| − |λ_2|`, or `radius` for a 1×1 matrix.
    pub gap: f64,
}

impl LeadingEigenvalue {
    pub fn complex(&self) -> Option<Complex64> {
        self.value.map(|(re, im)| Complex64::new(re, im))
    }

    pub fn flagged(&self) -> bool {
        self.value.is_none()
    }
}

/// Eigenvalue of maximal modulus of `P_u` (Schur decomposition).
///
/// At `u = 0` the matrix is stochastic and the value is exactly 1.
pub fn leading_eigenvalue(op: &TwistedOperator) -> Result<LeadingEigenvalue, SpectralError> {
    let mut ev = op.eigenvalues()?;
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let radius = ev[0].norm();
    let gap = if ev.len() > 1 { radius - ev[1].norm() } else { radius };
    if op.u == 0.0 {
        return Ok(LeadingEigenvalue { u: 0.0, value: Some((1.0, 0.0)), radius: 1.0, gap });
    }
    let value = if gap <= TIE_TOL { None } else { Some((ev[0].re, ev[0].im)) };
    Ok(LeadingEigenvalue { u: op.u, value, radius, gap })
}

pub fn spectral_radius(g: &GibbsMarkov, step: &StepFunction, u: f64) -> Result<f64, SpectralError> {
    Ok(leading_eigenvalue(&TwistedOperator::new(g, step, u))?.radius)
}

/// `λ_u` for `u` near 0, where the dominant eigenvalue is simple.
pub fn lambda(g: &GibbsMarkov, step: &StepFunction, u: f64) -> Result<Complex64, SpectralError> {
    leading_eigenvalue(&TwistedOperator::new(g, step, u))?
        .complex()
        .ok_or(SpectralError::Eigen { u })
}

/// Green–Kubo `σ_φ² = Var(φ) + 2Σ_{k≥1} Cov(φ, φ∘θ^k)`.
pub fn green_kubo_variance(g: &GibbsMarkov, step: &StepFunction) -> Result<f64, SpectralError> {
    let f: Vec<f64> = step.pair_table().iter().map(|&v| v as f64).collect();
    Ok(g.asymptotic_variance(&f)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Report {
    /// `−Re λ''(0)` by the fourth-order stencil at `h = 10⁻³`.
    pub spectral: f64,
    /// Same stencil at `h = 10⁻⁴` (rounding-dominated, consistency only).
    pub spectral_fine: f64,
    pub green_kubo: f64,
    /// `|λ'(0)|` by the fourth-order first-derivative stencil at `h = 10⁻³`.
    pub lambda_prime_abs: f64,
}

impl Sigma2Report {
    pub fn relative_gap(&self) -> f64 {
        rel_gap(self.spectral, self.green_kubo)
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

fn second_derivative(f: impl Fn(f64) -> Result<f64, SpectralError>, h: f64) -> Result<f64, SpectralError> {
    Ok((-f(2.0 * h)? + 16.0 * f(h)? - 30.0 * f(0.0)? + 16.0 * f(-h)? - f(-2.0 * h)?) / (12.0 * h * h))
}

/// `σ_φ² = −λ''(0)`, checked against Green–Kubo and against the finer
/// stencil to [`SIGMA_REL_TOL`].
pub fn sigma2_from_curve(g: &GibbsMarkov, step: &StepFunction) -> Result<Sigma2Report, SpectralError> {
    let re = |u: f64| lambda(g, step, u).map(|z| z.re);
    let spectral = -second_derivative(re, 1e-3)?;
    let spectral_fine = -second_derivative(re, 1e-4)?;
    let h = 1e-3;
    let d1 = (lambda(g, step, -2.0 * h)? - lambda(g, step, -h)? * 8.0 + lambda(g, step, h)? * 8.0
        - lambda(g, step, 2.0 * h)?)
        / (12.0 * h);
    let green_kubo = green_kubo_variance(g, step)?;
    let report = Sigma2Report { spectral, spectral_fine, green_kubo, lambda_prime_abs: d1.norm() };
    let agree = |a: f64, b: f64| (a - b).abs() <= SIGMA_REL_TOL * a.abs().max(b.abs()) + 1e-12;
    if !agree(spectral, green_kubo) || !agree(spectral, spectral_fine) {
        return Err(SpectralError::SigmaMismatch { spectral, green_kubo });
    }
    Ok(report)
}

/// Spectral data on `u_j = jπ/G`, `j = 0..=G`, with refined peaks.
///
/// Since `ρ(P_u) → 1` as `u → 0`, the verdict looks at the local maxima of
/// `u ↦ ρ(P_u)` on `(0, π]` (the endpoint `π` counts when the curve rises
/// into it). A unit-modulus eigenvalue at some `u* ≠ 0` forces such a peak,
/// so `nonarithmetic` holds iff every refined peak is `≤ 1 − δ`. Peaks
/// narrower than the grid spacing (spans above about `2G`) are not resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub grid: Vec<f64>,
    pub leading: Vec<LeadingEigenvalue>,
    pub radius: Vec<f64>,
    pub sigma2_phi: f64,
    /// Largest radius at a grid point of `(0, π]` (includes the shoulder at 0).
    pub max_grid_radius: f64,
    /// Largest refined local-maximum radius, if the curve has a peak.
    pub peak_radius: Option<f64>,
    pub peak_u: Option<f64>,
    pub nonarithmetic: bool,
    /// Smallest refined peak `u` with radius `> 1 − δ`.
    pub offending_u: Option<f64>,
    /// `2π/offending_u` when it is an integer (the lattice span of `S_n`).
    pub period: Option<u64>,
}

impl SpectralCurve {
    /// CSV rows `u,re_lambda,im_lambda,radius` (flagged points leave λ blank).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,re_lambda,im_lambda,radius\n");
        for (l, &r) in self.leading.iter().zip(&self.radius) {
            match l.value {
                Some((re, im)) => out.push_str(&format!("{:.17e},{re:.17e},{im:.17e},{r:.17e}\n", l.u)),
                None => out.push_str(&format!("{:.17e},,,{r:.17e}\n", l.u)),
            }
        }
        out
    }
}

fn golden_max(f: impl Fn(f64) -> Result<f64, SpectralError>, mut a: f64, mut b: f64) -> Result<(f64, f64), SpectralError> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (fa, fb) = (f(a)?, f(b)?);
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for cand in [(a, fa), (b, fb)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}

/// Spectral radius scan of `P_u` over `(0, π]` with golden-section
/// refinement around every grid-local maximum.
pub fn nonarithmeticity_scan(
    g: &GibbsMarkov,
    step: &StepFunction,
    grid_size: usize,
) -> Result<SpectralCurve, SpectralError> {
    if grid_size < 64 {
        return Err(SpectralError::InvalidArgument(format!("grid_size {grid_size} < 64")));
    }
    let grid: Vec<f64> = (0..=grid_size).map(|j| j as f64 * PI / grid_size as f64).collect();
    let leading: Vec<LeadingEigenvalue> = grid
        .iter()
        .map(|&u| leading_eigenvalue(&TwistedOperator::new(g, step, u)))
        .collect::<Result<_, _>>()?;
    let radius: Vec<f64> = leading.iter().map(|l| l.radius).collect();
    let rad = |u: f64| spectral_radius(g, step, u);
    let mut maxima: Vec<(f64, f64)> = Vec::new();
    for j in 1..=grid_size {
        let left = radius[j - 1];
        let right = if j < grid_size { radius[j + 1] } else { f64::NEG_INFINITY };
        if radius[j] >= left && radius[j] >= right {
            let hi = if j < grid_size { grid[j + 1] } else { PI };
            // Never refine toward u = 0, where the radius is 1 by stochasticity.
            let lo = if j == 1 { grid[1] } else { grid[j - 1] };
            let (u, r) = golden_max(rad, lo, hi)?;
            maxima.push(if r > radius[j] + 1e-14 { (u, r) } else { (grid[j], radius[j]) });
        }
    }
    let peak = maxima.iter().copied().fold(None, |best: Option<(f64, f64)>, m| match best {
        Some(b) if b.1 >= m.1 => Some(b),
        _ => Some(m),
    });
    let offending_u = maxima
        .iter()
        .filter(|m| m.1 > 1.0 - DELTA_SCAN)
        .map(|m| m.0)
        .fold(None, |acc: Option<f64>, u| Some(acc.map_or(u, |a| a.min(u))));
    let period = offending_u.and_then(|u| {
        let p = 2.0 * PI / u;
        let r = p.round();
        ((p - r).abs() < 1e-4 * r).then_some(r as u64)
    });
    Ok(SpectralCurve {
        max_grid_radius: radius[1..].iter().copied().fold(0.0, f64::max),
        grid,
        leading,
        radius,
        sigma2_phi: green_kubo_variance(g, step)?,
        peak_radius: peak.map(|p| p.1),
        peak_u: peak.map(|p| p.0),
        nonarithmetic: offending_u.is_none(),
        offending_u,
        period,
    })
}

/// Largest `c₁` with `|λ_u| ≤ e^{−c₁u²}` at every curve point in `(0, β]`.
pub fn contraction_constant(curve: &SpectralCurve, beta: f64) -> f64 {
    curve
        .grid
        .iter()
        .zip(&curve.radius)
        .filter(|(u, _)| **u > 0.0 && **u <= beta)
        .map(|(u, r)| -r.ln() / (u * u))
        .fold(f64::INFINITY, f64::min)
}
