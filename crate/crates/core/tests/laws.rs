use proptest::prelude::*;
use qrec::laws::identities::{
    integral_equation_residual, laplace_check_inverse_normal_sq, laplace_check_w, laplace_inverse_normal_sq,
};
use qrec::laws::{
    c_beta, exponent_regression, fit_median_scale, fluctuation_test, ks_critical, ks_distance, renewal_limit_law,
    EmpiricalDistribution, LawError, ReferenceLaw, KS_COEF_99,
};
use qrec::rng::stream;

fn laws() -> Vec<ReferenceLaw> {
    vec![
        ReferenceLaw::ExpOverAbsNormal { scale: 1.0 },
        ReferenceLaw::ExpOverAbsNormal { scale: 0.25 },
        ReferenceLaw::InverseNormalSquared,
        ReferenceLaw::ExponentialMeanOne,
        ReferenceLaw::Gaussian { variance: 0.3 },
    ]
}

#[test]
fn sampler_matches_cdf_for_every_law() {
    let n = 20_000;
    for (j, law) in laws().into_iter().enumerate() {
        let mut rng = stream(900, j as u64);
        let x: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let ks = ks_distance(&EmpiricalDistribution::new(x).unwrap(), &law).unwrap();
        assert!(ks.statistic < ks_critical(n, KS_COEF_99), "{}: {}", law.label(), ks.statistic);
    }
}

#[test]
fn censored_ks_on_exact_samples() {
    let law = ReferenceLaw::ExpOverAbsNormal { scale: 0.7 };
    let mut rng = stream(901, 0);
    let n = 10_000;
    let threshold = 2.0;
    let x: Vec<f64> = (0..n).map(|_| law.sample(&mut rng).min(threshold)).collect();
    let emp = EmpiricalDistribution::censored(x, threshold).unwrap();
    let ks = ks_distance(&emp, &law).unwrap();
    assert!(ks.statistic < ks_critical(n, KS_COEF_99));
    assert!(ks.n_observed < n);
    assert!((ks.reference_mass_below - law.cdf(threshold)).abs() < 1e-15);
    // The fitted scale recovers the truth.
    let s = fit_median_scale(&emp).unwrap();
    assert!((s - 0.7).abs() < 0.05, "{s}");
}

#[test]
fn median_of_censored_majority_is_unavailable() {
    let emp = EmpiricalDistribution::censored(vec![0.1, 5.0, 5.0, 5.0], 1.0).unwrap();
    assert_eq!(fit_median_scale(&emp), Err(LawError::MedianCensored));
}

#[test]
fn inverse_normal_square_laplace_identity() {
    let t: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
    assert!(laplace_check_inverse_normal_sq(&t).unwrap() < 1e-8);
    assert!((laplace_inverse_normal_sq(0.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn w_laplace_transform_and_negative_control() {
    let c = c_beta(1.0);
    let pts = laplace_check_w(c, c * c / 2.0, &[0.25, 1.0, 4.0], 200_000, 17).unwrap();
    for p in &pts {
        assert!(p.z_score().abs() < 3.0, "{p:?}");
    }
    let bad = laplace_check_w(1.0, 1.0, &[1.0], 200_000, 17).unwrap();
    assert!((bad[0].expected - 0.5).abs() < 1e-15);
    assert!(bad[0].z_score().abs() > 10.0);
    assert!((bad[0].empirical - 1.0 / (1.0 + 2f64.sqrt())).abs() < 5.0 * bad[0].std_error);
}

#[test]
fn renewal_equation_closure() {
    let t: Vec<f64> = (1..=16).map(|i| i as f64 * 0.25).collect();
    for beta in [0.5, 1.0, 1.0 / 0.316_227_766] {
        let r = integral_equation_residual(&renewal_limit_law(beta), beta, &t).unwrap();
        assert!(r < 1e-6, "beta={beta}: {r}");
        let literal = ReferenceLaw::ExpOverAbsNormal { scale: c_beta(beta) };
        assert!(integral_equation_residual(&literal, beta, &t).unwrap() > 1e-2);
    }
}

#[test]
fn regression_recovers_a_line() {
    let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
    let r = exponent_regression(&pts).unwrap();
    assert!((r.slope - 2.0).abs() < 1e-14 && (r.intercept + 1.0).abs() < 1e-14);
    assert!((r.r_squared - 1.0).abs() < 1e-14);
    assert!(exponent_regression(&pts[..2]).is_err());
}

#[test]
fn fluctuation_statistics_of_gaussian_draws() {
    let law = ReferenceLaw::Gaussian { variance: 2.0 * 0.15 };
    let mut rng = stream(902, 0);
    let x: Vec<f64> = (0..5000).map(|_| law.sample(&mut rng)).collect();
    let r = fluctuation_test(&x, 0.15).unwrap();
    assert!(r.centered());
    assert!((r.variance_ratio - 1.0).abs() < 0.1);
    assert_eq!(fluctuation_test(&x, 0.0), Err(LawError::MaximalEntropy));
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(p in 0.001f64..0.999, j in 0usize..5) {
        let law = laws()[j];
        let q = law.quantile(p);
        prop_assert!((law.cdf(q) - p).abs() < 1e-9);
    }

    #[test]
    fn cdf_and_sf_are_complementary(t in -5.0f64..50.0, j in 0usize..5) {
        let law = laws()[j];
        let (f, s) = (law.cdf(t), law.sf(t));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f + s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cdf_is_monotone(a in 0.0f64..20.0, d in 0.0f64..5.0, j in 0usize..5) {
        let law = laws()[j];
        prop_assert!(law.cdf(a) <= law.cdf(a + d) + 1e-16);
    }
}
