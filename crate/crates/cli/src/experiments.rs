//! One runner per experiment kind. Each returns its tables and verdicts;
//! writing them out is left to the caller.

use std::f64::consts::PI;

use qrec::laws::identities::{integral_equation_residual, laplace_check_inverse_normal_sq, laplace_check_w};
use qrec::laws::{
    c_beta, fit_median_scale, ks_critical, ks_distance, renewal_limit_law, EmpiricalDistribution, ReferenceLaw,
    Verdict, KS_COEF_99,
};
use qrec::model::Model;
use qrec::spectral::{
    cylinder_ratio, green_kubo_variance, llt_lattice_check, nonarithmeticity_scan, sigma2_from_curve, DpOptions,
    DELTA_SCAN,
};
use qrec::toy::{exponent_experiment, sample_r_n_batch, sample_tau_batch, ToyConfig};
use qrec::zext::{run_tau_experiment, CapPolicy, ExperimentConfig, KTable, ReturnKind, StartFilter, ZExtension};

use crate::error::CliError;
use crate::manifest::{Manifest, Params};

/// A CSV table: fixed header, pre-formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: &'static str,
    pub header: &'static str,
    pub rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
}

/// Shortest round-trip decimal, switching to exponent form for extreme magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() { format!("{x}") } else { format!("{x:e}") }
}

fn model_of(m: &Option<Model>) -> Result<&Model, CliError> {
    m.as_ref().ok_or_else(|| CliError::field("model", "this experiment needs a model (preset or inline)"))
}

fn step_of(m: &Model) -> Result<&qrec::gibbs::StepFunction, CliError> {
    m.step.as_ref().ok_or_else(|| CliError::field("model.step", "this experiment needs a step function"))
}

/// Fill parameters whose defaults depend on the model or on other parameters.
pub fn resolve(manifest: &mut Manifest, model: &Option<Model>) -> Result<(), CliError> {
    match &mut manifest.params {
        Params::ToyTau(p) => {
            if p.step_cap.is_none() {
                let cfg = ToyConfig::new(p.dim, p.eps, p.mode)
                    .and_then(|c| c.with_norm(p.norm))
                    .map_err(|e| CliError::field("params", e))?;
                let cap = (40.0 / cfg.hit_probability()).powi(2).ceil();
                p.step_cap = Some(if cap >= u64::MAX as f64 { u64::MAX } else { cap as u64 });
            }
        }
        Params::ZextTau(p) => {
            if p.filter.is_none() {
                let min_cyl_prob = match p.cap {
                    CapPolicy::Scaled { limit, hard } => Some(limit / (hard as f64).sqrt()),
                    CapPolicy::Fixed { .. } => None,
                };
                p.filter = Some(StartFilter { min_period: Some(p.k + 1), min_cyl_prob });
            }
        }
        Params::LimitsVerify(p)
            if p.beta.is_none() => {
                p.beta = Some(match model {
                    Some(m) if m.step.is_some() => {
                        1.0 / green_kubo_variance(&m.gibbs, step_of(m)?).map_err(CliError::run)?.sqrt()
                    }
                    _ => 1.0,
                });
            }
        _ => {}
    }
    Ok(())
}

pub fn run(manifest: &Manifest, model: &Option<Model>) -> Result<RunOutput, CliError> {
    let seed = manifest.seed;
    match &manifest.params {
        Params::ToyTau(p) => {
            let cfg = ToyConfig::new(p.dim, p.eps, p.mode)
                .and_then(|c| c.with_norm(p.norm))
                .map_err(|e| CliError::field("params", e))?;
            let cap = p.step_cap.expect("resolved");
            let lam = cfg.hit_probability();
            let samples = sample_tau_batch(&cfg, seed, p.n_samples, cap).map_err(|e| CliError::field("params", e))?;
            let rows = samples
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    format!("{i},{},{},{},{},{}", s.tau, s.t_count, s.r_total, s.censored, num(lam * (s.tau as f64).sqrt()))
                })
                .collect();
            let x: Vec<f64> = samples.iter().map(|s| lam * (s.tau as f64).sqrt()).collect();
            let emp = EmpiricalDistribution::censored(x, lam * (cap as f64).sqrt()).map_err(CliError::run)?;
            let ks = ks_distance(&emp, &ReferenceLaw::ExpOverAbsNormal { scale: 1.0 }).map_err(CliError::run)?;
            let n = samples.len();
            Ok(RunOutput {
                tables: vec![Table { file: "samples.csv", header: "index,tau,t_count,r_total,censored,scaled", rows }],
                verdicts: vec![
                    Verdict::at_most("ks_exp_over_abs_normal", ks.statistic, n, ks_critical(n, KS_COEF_99)),
                    Verdict::info("censored_fraction", (n - ks.n_observed) as f64 / n as f64, n),
                    Verdict::info("lambda_eps", lam, n),
                ],
            })
        }
        Params::ToyExponent(p) => {
            let first = *p.eps_list.first().ok_or_else(|| CliError::field("params.eps_list", "empty list"))?;
            let base = ToyConfig::new(p.dim, first, p.mode)
                .and_then(|c| c.with_norm(p.norm))
                .map_err(|e| CliError::field("params", e))?;
            let fit = exponent_experiment(&base, &p.eps_list, p.n_samples, p.step_cap, seed)
                .map_err(|e| CliError::field("params", e))?;
            let rows = fit
                .points
                .iter()
                .map(|q| format!("{},{},{}", num(q.eps), num(q.median_tau), num(q.censored_fraction)))
                .collect();
            let target = 2.0 * p.dim as f64;
            let slope = fit.regression.slope;
            Ok(RunOutput {
                tables: vec![Table { file: "samples.csv", header: "eps,median_tau,censored_fraction", rows }],
                verdicts: vec![
                    Verdict::within(
                        "recurrence_exponent",
                        slope,
                        fit.points.len(),
                        target * (1.0 - p.tolerance),
                        target * (1.0 + p.tolerance),
                    ),
                    Verdict::info("r_squared", fit.regression.r_squared, fit.points.len()),
                ],
            })
        }
        Params::ToyRn(p) => {
            let r = sample_r_n_batch(p.n, seed, p.n_samples).map_err(|e| CliError::field("params", e))?;
            let n2 = (p.n as f64).powi(2);
            let rows = r.iter().enumerate().map(|(i, &v)| format!("{i},{v},{}", num(v as f64 / n2))).collect();
            let x: Vec<f64> = r.iter().map(|&v| v as f64 / n2).collect();
            let ks = ks_distance(&EmpiricalDistribution::new(x).map_err(CliError::run)?, &ReferenceLaw::InverseNormalSquared)
                .map_err(CliError::run)?;
            Ok(RunOutput {
                tables: vec![Table { file: "samples.csv", header: "index,r_n,scaled", rows }],
                verdicts: vec![Verdict::at_most("ks_inverse_normal_squared", ks.statistic, r.len(), ks_critical(r.len(), KS_COEF_99))],
            })
        }
        Params::SftBuild(_) => {
            let m = model_of(model)?;
            let g = &m.gibbs;
            let name = |s: usize| {
                g.code().state_word(s).iter().map(|&a| m.doc.alphabet[a].as_str()).collect::<Vec<_>>().join(" ")
            };
            let states = (0..g.n_states()).map(|s| format!("{s},{},{}", name(s), num(g.stationary()[s]))).collect();
            let mut pairs = Vec::new();
            for u in 0..g.n_states() {
                for v in 0..g.n_states() {
                    let q = g.transition(u, v);
                    if q > 0.0 {
                        let phi = m.step.as_ref().map(|s| s.pair(u, v).to_string()).unwrap_or_default();
                        pairs.push(format!("{u},{v},{},{phi}", num(q)));
                    }
                }
            }
            let mut verdicts = vec![
                Verdict::at_most("stationarity_residual", g.stationarity_residual(), g.n_states(), 1e-12),
                Verdict::info("entropy", g.entropy(), g.n_states()),
                Verdict::info("dimension", g.dimension(), g.n_states()),
                Verdict::info("perron_value", g.perron_value(), g.n_states()),
            ];
            match g.entropy_variance() {
                Ok(v) => verdicts.push(Verdict::info("sigma2_h", v, g.n_states())),
                Err(e) => return Err(CliError::run(e)),
            }
            if let Some(s) = &m.step {
                verdicts.push(Verdict::at_most("step_mean_residual", s.mean_residual(), g.n_states(), 1e-12));
            }
            Ok(RunOutput {
                tables: vec![
                    Table { file: "samples.csv", header: "state,word,stationary", rows: states },
                    Table { file: "transitions.csv", header: "from,to,probability,step", rows: pairs },
                ],
                verdicts,
            })
        }
        Params::SftSpectral(p) => {
            let m = model_of(model)?;
            let s = step_of(m)?;
            let curve = nonarithmeticity_scan(&m.gibbs, s, p.grid_size).map_err(|e| CliError::field("params.grid_size", e))?;
            let sig = sigma2_from_curve(&m.gibbs, s).map_err(CliError::run)?;
            let rows = curve.to_csv().lines().skip(1).map(str::to_string).collect();
            let n = curve.grid.len();
            let mut verdicts = vec![
                Verdict::at_most("nonarithmetic_peak_radius", curve.peak_radius.unwrap_or(0.0), n, 1.0 - DELTA_SCAN),
                Verdict::info("max_grid_radius", curve.max_grid_radius, n),
                Verdict::at_most("sigma2_spectral_vs_green_kubo", sig.relative_gap(), n, qrec::spectral::SIGMA_REL_TOL),
                Verdict::info("sigma2_spectral", sig.spectral, n),
                Verdict::info("sigma2_green_kubo", sig.green_kubo, n),
                Verdict::info("lambda_prime_abs", sig.lambda_prime_abs, n),
            ];
            if let Some(u) = curve.offending_u {
                verdicts.push(Verdict::info("offending_u", u, n));
            }
            if let Some(period) = curve.period {
                verdicts.push(Verdict::info("lattice_span", period as f64, n));
            }
            Ok(RunOutput { tables: vec![Table { file: "curve.csv", header: "u,re_lambda,im_lambda,radius", rows }], verdicts })
        }
        Params::ZextLlt(p) => {
            let m = model_of(model)?;
            let s = step_of(m)?;
            let opts = DpOptions { budget: p.budget as u128 };
            let t = llt_lattice_check(&m.gibbs, s, &p.n_list, &opts).map_err(|e| CliError::field("params", e))?;
            let cyl = match &p.cylinder {
                Some(c) => {
                    let word = |w: &[String], path: &str| {
                        let names: Vec<&str> = w.iter().map(String::as_str).collect();
                        m.doc.word(&names).map_err(|e| CliError::field(path, e.message))
                    };
                    Some((word(&c.a, "params.cylinder.a")?, word(&c.b, "params.cylinder.b")?))
                }
                None => None,
            };
            let mut rows = Vec::new();
            let mut last = None;
            for r in &t.rows {
                let cr = match &cyl {
                    Some((a, b)) => Some(
                        cylinder_ratio(&m.gibbs, s, a, b, r.n, &opts).map_err(|e| CliError::field("params.cylinder", e))?,
                    ),
                    None => None,
                };
                rows.push(format!("{},{},{},{}", r.n, num(r.probability), num(r.ratio), cr.map(num).unwrap_or_default()));
                last = Some((r.n, cr.unwrap_or(r.ratio)));
            }
            let mut verdicts = vec![Verdict::info("sigma2_phi", t.sigma2, t.rows.len())];
            if let Some(p0) = t.period {
                verdicts.push(Verdict::info("lattice_span", p0 as f64, t.rows.len()));
            }
            if let Some((n, ratio)) = last {
                verdicts.push(Verdict::within(format!("llt_ratio_n{n}"), ratio, n, 1.0 - p.tolerance, 1.0 + p.tolerance));
            }
            Ok(RunOutput { tables: vec![Table { file: "samples.csv", header: "n,probability,ratio,cylinder_ratio", rows }], verdicts })
        }
        Params::ZextTau(p) => {
            let m = model_of(model)?;
            let s = step_of(m)?;
            let z = ZExtension::new(&m.gibbs, s).map_err(CliError::run)?;
            let cfg = ExperimentConfig {
                kind: ReturnKind::Tau,
                k_list: vec![p.k],
                n_samples: p.n_samples,
                cap: p.cap,
                filter: p.filter.expect("resolved"),
            };
            let table = run_tau_experiment(&z, &cfg, seed).map_err(|e| CliError::field("params", e))?.remove(0);
            let (x, thr) = table.scaled_returns(0.5);
            let emp = EmpiricalDistribution::censored(x, thr).map_err(CliError::run)?;
            let scale = fit_median_scale(&emp).map_err(CliError::run)?;
            let ks = ks_distance(&emp, &ReferenceLaw::ExpOverAbsNormal { scale }).map_err(CliError::run)?;
            let sigma = green_kubo_variance(&m.gibbs, s).map_err(CliError::run)?.sqrt();
            let n = table.samples.len();
            Ok(RunOutput {
                tables: vec![return_table(&table, 0.5)],
                verdicts: vec![
                    Verdict::at_most("ks_scaled_exp_over_abs_normal", ks.statistic, n, p.ks_threshold),
                    Verdict::info("fitted_scale", scale, n),
                    Verdict::info("sigma_phi_over_sqrt_pi", sigma / PI.sqrt(), n),
                    Verdict::info("sigma_phi", sigma, n),
                    Verdict::info("censored_fraction", table.censored_fraction, n),
                    Verdict::info("rejected_start_fraction", table.rejected_fraction, n),
                ],
            })
        }
        Params::ZextExponent(p) => {
            let m = model_of(model)?;
            let s = step_of(m)?;
            let z = ZExtension::new(&m.gibbs, s).map_err(CliError::run)?;
            let cfg = ExperimentConfig {
                kind: ReturnKind::Tau,
                k_list: p.k_list.clone(),
                n_samples: p.n_samples,
                cap: p.cap,
                filter: StartFilter::default(),
            };
            let tables = run_tau_experiment(&z, &cfg, seed).map_err(|e| CliError::field("params", e))?;
            let mut rows = Vec::new();
            let mut pairs = Vec::new();
            for t in &tables {
                let med = t.median_tau();
                rows.push(format!(
                    "{},{},{},{}",
                    t.k,
                    med.map(|v| v.to_string()).unwrap_or_default(),
                    num(t.censored_fraction),
                    t.samples.len()
                ));
                if let Some(v) = med {
                    pairs.push((t.k as f64, (v as f64).ln()));
                }
            }
            let target = 2.0 * m.gibbs.dimension();
            let mut verdicts = vec![Verdict::info("two_d", target, tables.len())];
            if pairs.len() < tables.len() {
                verdicts.push(Verdict::at_most("censored_medians", (tables.len() - pairs.len()) as f64, tables.len(), 0.0));
            }
            match qrec::laws::exponent_regression(&pairs) {
                Ok(reg) => verdicts.push(Verdict::within(
                    "recurrence_rate_slope",
                    reg.slope,
                    pairs.len(),
                    target * (1.0 - p.tolerance),
                    target * (1.0 + p.tolerance),
                )),
                Err(e) => return Err(CliError::run(e)),
            }
            Ok(RunOutput { tables: vec![Table { file: "samples.csv", header: "k,median_tau,censored_fraction,n", rows }], verdicts })
        }
        Params::Hirata(p) => {
            let m = model_of(model)?;
            let s = step_of(m)?;
            let z = ZExtension::new(&m.gibbs, s).map_err(CliError::run)?;
            let cfg = ExperimentConfig {
                kind: ReturnKind::Hirata,
                k_list: vec![p.k],
                n_samples: p.n_samples,
                cap: p.cap,
                filter: StartFilter::default(),
            };
            let table = run_tau_experiment(&z, &cfg, seed).map_err(|e| CliError::field("params", e))?.remove(0);
            let (x, thr) = table.scaled_returns(1.0);
            let emp = EmpiricalDistribution::censored(x.clone(), thr).map_err(CliError::run)?;
            let ks = ks_distance(&emp, &ReferenceLaw::ExponentialMeanOne).map_err(CliError::run)?;
            let n = x.len();
            let mean = x.iter().sum::<f64>() / n as f64;
            Ok(RunOutput {
                tables: vec![return_table(&table, 1.0)],
                verdicts: vec![
                    Verdict::at_most("ks_exponential", ks.statistic, n, p.ks_threshold),
                    Verdict::info("kac_mean", mean, n),
                    Verdict::info("censored_fraction", table.censored_fraction, n),
                ],
            })
        }
        Params::LimitsVerify(p) => {
            let beta = p.beta.expect("resolved");
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(CliError::field("params.beta", format!("must be positive, got {beta}")));
            }
            let law = renewal_limit_law(beta);
            let residual = integral_equation_residual(&law, beta, &p.t_list).map_err(|e| CliError::field("params.t_list", e))?;
            let c = c_beta(beta);
            let pts = laplace_check_w(c, c * c / 2.0, &p.s_list, p.n_draws, seed).map_err(|e| CliError::field("params", e))?;
            let quad = laplace_check_inverse_normal_sq(&p.t_list).map_err(|e| CliError::field("params.t_list", e))?;
            let mut rows = vec![format!("integral_equation,,{},0,{}", num(residual), num(residual))];
            for q in &pts {
                rows.push(format!("laplace_w,{},{},{},{}", num(q.s), num(q.empirical), num(q.expected), num(q.z_score())));
            }
            rows.push(format!("laplace_inverse_normal_sq,,{},0,{}", num(quad), num(quad)));
            let worst_z = pts.iter().map(|q| q.z_score().abs()).fold(0.0, f64::max);
            Ok(RunOutput {
                tables: vec![Table { file: "samples.csv", header: "check,param,value,expected,error", rows }],
                verdicts: vec![
                    Verdict::at_most("integral_equation_residual", residual, p.t_list.len(), 1e-6),
                    Verdict::at_most("laplace_w_max_abs_z", worst_z, p.n_draws, 3.0),
                    Verdict::at_most("laplace_inverse_normal_sq", quad, p.t_list.len(), 1e-8),
                    Verdict::info("c_beta", c, 1),
                ],
            })
        }
    }
}

fn return_table(t: &KTable, exponent: f64) -> Table {
    let rows = t
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!(
                "{i},{},{},{},{},{},{},{}",
                s.k,
                s.tau,
                num(s.cyl_prob),
                s.censored,
                s.cap,
                s.attempts,
                num(s.cyl_prob * (s.tau as f64).powf(exponent))
            )
        })
        .collect();
    Table { file: "samples.csv", header: "index,k,tau,cyl_prob,censored,cap,attempts,scaled", rows }
}
