//! Simulation and numerical verification of quantitative recurrence for a
//! random-walk toy model and for Z-extensions of subshifts of finite type.
//!
//! * [`toy`]: exact samplers for the simple random walk return times and the
//!   toy recurrence time `τ_ε = R_{T_ε}`.
//! * [`gibbs`]: subshifts of finite type, Gibbs–Markov measures from locally
//!   constant potentials, cylinder measures, centered step functions.
//! * [`spectral`]: twisted transfer matrices, the eigenvalue curve `λ_u`,
//!   variance identities, non-arithmeticity, exact local-limit DP.
//! * [`zext`]: Monte Carlo return times for the skew product
//!   `T(x, l) = (θx, l + φ(x))` and cylinder return times.
//! * [`laws`]: reference distributions, KS tests, regressions, identities.
//! * [`model`]: JSON model documents and built-in presets.

pub mod gibbs;
pub mod laws;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod toy;
pub mod zext;
