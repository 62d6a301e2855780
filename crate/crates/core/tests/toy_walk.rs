use proptest::prelude::*;
use qrec::laws::empirical::{ks_two_sample, KS_COEF_99};
use qrec::laws::{ks_critical, ks_distance, EmpiricalDistribution, ReferenceLaw};
use qrec::rng::stream;
use qrec::toy::{
    sample_first_return, sample_r_n, sample_tau, sample_tau_batch, simulate_walk_until_return,
    FirstReturnSampler, ToyConfig, ToyMode,
};

/// Count walks of length 2n whose first return to 0 is at 2n, by enumerating
/// all 2^{2n} sign sequences.
fn enumerate_first_returns(n: u32) -> u64 {
    let len = 2 * n;
    let mut count = 0;
    for bits in 0u64..(1u64 << len) {
        let mut pos = 0i32;
        let mut first = None;
        for i in 0..len {
            pos += if bits >> i & 1 == 1 { 1 } else { -1 };
            if pos == 0 {
                first = Some(i + 1);
                break;
            }
        }
        if first == Some(len) {
            count += 1;
        }
    }
    count
}

/// Same count by dynamic programming over positions, avoiding 0 before 2n.
fn dp_first_returns(n: usize) -> u128 {
    let len = 2 * n;
    let off = len + 1;
    let mut ways = vec![0u128; 2 * off + 1];
    ways[off] = 1;
    for step in 1..=len {
        let mut next = vec![0u128; ways.len()];
        for (i, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for j in [i - 1, i + 1] {
                if j == off && step < len {
                    continue;
                }
                next[j] += w;
            }
        }
        ways = next;
    }
    ways[off]
}

#[test]
fn table_matches_brute_force_enumeration() {
    let s = FirstReturnSampler::shared();
    for n in 1..=10u32 {
        let exact = enumerate_first_returns(n) as f64 / 4f64.powi(n as i32);
        let rel = (s.pmf(n as u64) / exact - 1.0).abs();
        assert!(rel < 1e-12, "n={n}: {} vs {exact}", s.pmf(n as u64));
    }
}

#[test]
fn table_matches_path_counting_to_twenty() {
    let s = FirstReturnSampler::shared();
    for n in 1..=20usize {
        let exact = dp_first_returns(n) as f64 / 4f64.powi(n as i32);
        let rel = (s.pmf(n as u64) / exact - 1.0).abs();
        assert!(rel < 1e-12, "n={n}");
    }
}

#[test]
fn empirical_frequencies_of_first_values() {
    let mut rng = stream(42, 0);
    let n = 400_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        let r = sample_first_return(&mut rng);
        assert_eq!(r % 2, 0);
        if r <= 8 {
            counts[(r / 2) as usize] += 1;
        }
    }
    for (k, p) in [(1, 0.5), (2, 0.125), (3, 1.0 / 16.0), (4, 5.0 / 128.0)] {
        let f = counts[k] as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 4.0 * se, "R=2·{k}: {f} vs {p}");
    }
}

#[test]
fn exact_sampler_agrees_with_direct_walk() {
    let cap = 1u64 << 16;
    let n = 40_000;
    let mut ra = stream(7, 0);
    let mut rb = stream(7, 1);
    // Compare on min(R, cap) so both sides see the same censoring.
    let direct: Vec<f64> = (0..n)
        .map(|_| simulate_walk_until_return(&mut ra, cap).unwrap_or(cap) as f64)
        .collect();
    let exact: Vec<f64> = (0..n)
        .map(|_| (sample_first_return(&mut rb) as u64).min(cap) as f64)
        .collect();
    let d = ks_two_sample(
        &EmpiricalDistribution::new(direct).unwrap(),
        &EmpiricalDistribution::new(exact).unwrap(),
    )
    .unwrap();
    // two-sample 99% critical value 1.63·√(2/n)
    assert!(d < 1.63 * (2.0 / n as f64).sqrt(), "{d}");
}

#[test]
fn laplace_transform_of_rescaled_r_n() {
    // E[exp(−t·R_n/n²)] → e^{−√(2t)}, at t = 0.5 the limit is e^{−1}.
    let m = 1000u64;
    let n = 20_000;
    let t = 0.5;
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let r = sample_r_n(m, &mut stream(11, i)).unwrap() as f64;
            (-t * r / (m * m) as f64).exp()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    // finite-n bias is O(1/n) ≪ se here
    assert!((mean - (-1.0f64).exp()).abs() < 4.0 * se, "{mean} ± {se}");
}

#[test]
fn idealized_geometric_mean() {
    let cfg = ToyConfig::new(1, 0.1, ToyMode::Idealized).unwrap();
    let samples = sample_tau_batch(&cfg, 3, 20_000, u64::MAX).unwrap();
    let ts: Vec<f64> = samples.iter().map(|s| s.t_count as f64).collect();
    let n = ts.len() as f64;
    let mean = ts.iter().sum::<f64>() / n;
    let var = ts.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 5.0).abs() < 3.0 * (var / n).sqrt(), "{mean}");
    for s in &samples {
        assert!(!s.censored);
        assert_eq!(s.tau % 2, 0);
        assert_eq!(s.tau, s.r_total);
        assert!(s.tau >= 2 * s.t_count);
    }
}

#[test]
fn idealized_and_faithful_modes_agree() {
    let eps = 2f64.powi(-8);
    let n = 10_000;
    let ideal = ToyConfig::new(1, eps, ToyMode::Idealized).unwrap();
    let faith = ToyConfig::new(1, eps, ToyMode::Faithful).unwrap();
    let lam = ideal.hit_probability();
    let scaled = |cfg: &ToyConfig, master| -> Vec<f64> {
        sample_tau_batch(cfg, master, n, u64::MAX)
            .unwrap()
            .iter()
            .map(|s| lam * (s.tau as f64).sqrt())
            .collect()
    };
    let a = EmpiricalDistribution::new(scaled(&ideal, 1)).unwrap();
    let b = EmpiricalDistribution::new(scaled(&faith, 2)).unwrap();
    let d = ks_two_sample(&a, &b).unwrap();
    assert!(d < 1.63 * (2.0 / n as f64).sqrt() + eps, "{d}");
}

#[test]
fn faithful_mode_in_two_dimensions_has_geometric_t() {
    let cfg = ToyConfig::new(2, 0.05, ToyMode::Faithful).unwrap();
    let n = 20_000u64;
    let mean = (0..n)
        .map(|i| sample_tau(&cfg, &mut stream(5, i), u64::MAX).unwrap().t_count as f64)
        .sum::<f64>()
        / n as f64;
    let expected = 1.0 / cfg.hit_probability();
    // sd of Geometric(p) ≈ 1/p
    assert!((mean / expected - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn lambda_t_is_asymptotically_exponential() {
    let cfg = ToyConfig::new(1, 1e-3, ToyMode::Idealized).unwrap();
    let lam = cfg.hit_probability();
    let xs: Vec<f64> = sample_tau_batch(&cfg, 9, 20_000, u64::MAX)
        .unwrap()
        .iter()
        .map(|s| lam * s.t_count as f64)
        .collect();
    let emp = EmpiricalDistribution::new(xs).unwrap();
    let r = ks_distance(&emp, &ReferenceLaw::ExponentialMeanOne).unwrap();
    assert!(r.statistic < ks_critical(r.n, KS_COEF_99) + lam, "{}", r.statistic);
}

#[test]
fn seeded_runs_are_reproducible() {
    let cfg = ToyConfig::new(1, 0.01, ToyMode::Faithful).unwrap();
    let a = sample_tau_batch(&cfg, 77, 200, 1 << 30).unwrap();
    let b = sample_tau_batch(&cfg, 77, 200, 1 << 30).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_are_even_and_bounded(seed in any::<u64>(), idx in any::<u64>(), cap in 2u64..1_000_000) {
        let mut rng = stream(seed, idx);
        let r = sample_first_return(&mut rng);
        prop_assert!(r >= 2 && r.is_multiple_of(2));
        let cfg = ToyConfig::new(1, 0.05, ToyMode::Faithful).unwrap();
        let s = sample_tau(&cfg, &mut rng, cap).unwrap();
        prop_assert!(s.tau <= cap);
        if !s.censored {
            prop_assert_eq!(s.tau % 2, 0);
            prop_assert!(s.tau >= 2 * s.t_count);
        }
    }

    #[test]
    fn half_time_is_monotone_in_uniform(a in 1e-9f64..1.0, b in 1e-9f64..1.0) {
        let s = FirstReturnSampler::shared();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(s.half_time(lo) >= s.half_time(hi));
    }
}
