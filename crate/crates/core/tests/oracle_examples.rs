use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use skloc_core::amp::amp_run;
use skloc_core::experiments::{compare_to_exact, free_energy_derivative_probe, overlap_lipschitz_probe, w2_consistency};
use skloc_core::experiments::{FreeEnergyDerivativeOptions, OverlapLipschitzOptions};
use skloc_core::oracle::{
    covariance, exact_build, exact_cov_top_eigenvalue, exact_mean, exact_sample, glauber_run, permutation_threshold,
    w2_empirical,
};
use skloc_core::rng::{Purpose, Streams};
use skloc_core::sampler::{RunConfig, RunPlan};
use skloc_core::{sample_goe, sample_planted};

#[test]
fn covariance_top_eigenvalue_matches_dense_eigensolver() {
    let n = 9;
    let a = sample_goe(n, 4).unwrap();
    let mut rng = Streams::new(4).rng(Purpose::Field, 0, 0);
    let y: Vec<f64> = (0..n).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    let g = exact_build(&a, &y, 0.8).unwrap();
    let cov = DMatrix::from_row_slice(n, n, &covariance(&g));
    let top = cov.symmetric_eigen().eigenvalues.max();
    assert!((exact_cov_top_eigenvalue(&g) - top).abs() < 1e-8 * top);
}

#[test]
fn covariance_top_eigenvalue_trivial_cases() {
    let a = sample_goe(6, 1).unwrap();
    let g = exact_build(&a, &[0.0; 6], 0.0).unwrap();
    assert!((exact_cov_top_eigenvalue(&g) - 1.0).abs() < 1e-10);

    let a = sample_goe(1, 2).unwrap();
    let g = exact_build(&a, &[0.9], 0.4).unwrap();
    assert!((exact_cov_top_eigenvalue(&g) - (1.0 - 0.9f64.tanh().powi(2))).abs() < 1e-12);
}

#[test]
fn amp_gap_to_exact_mean_shrinks_then_plateaus() {
    let (n, beta, t) = (12, 0.3, 1.0);
    let p = sample_planted(n, beta, 12).unwrap();
    let mut rng = Streams::new(12).rng(Purpose::Field, 0, 0);
    let y: Vec<f64> = p
        .x0
        .iter()
        .map(|x| t * x + t.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let exact = exact_mean(&exact_build(&p.matrix, &y, beta).unwrap());
    let gap = |k| {
        let (m, _) = amp_run(&p.matrix, &y, beta, k).unwrap();
        skloc_core::linalg::dist_sq(m.values(), exact.values()) / n as f64
    };
    let (first, early, late) = (gap(1), gap(5), gap(25));
    assert!(late < first, "gap did not shrink: k=1 {first}, k=25 {late}");
    // at n = 12 AMP has converged by k = 5; what remains is a finite-n floor
    assert!((late - early).abs() < 0.05 * early, "k=5 {early}, k=25 {late}");
}

#[test]
fn exact_sampling_is_uniform_at_infinite_temperature() {
    let n = 6;
    let count = 1_000_000;
    let a = sample_goe(n, 3).unwrap();
    let g = exact_build(&a, &vec![0.0; n], 0.0).unwrap();
    let s = exact_sample(&g, count, 7).unwrap();
    let mut cells = vec![0u64; 1 << n];
    for c in s.codes() {
        cells[c as usize] += 1;
    }
    let expected = count as f64 / cells.len() as f64;
    let chi2: f64 = cells.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 63 degrees of freedom
    assert!(chi2 < 92.01, "chi-square {chi2}");
}

#[test]
fn exact_sample_means_within_binomial_error() {
    let n = 10;
    let count = 20_000;
    let a = sample_goe(n, 5).unwrap();
    let y: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.4).collect();
    let g = exact_build(&a, &y, 0.4).unwrap();
    let m = exact_mean(&g);
    let s = exact_sample(&g, count, 11).unwrap();
    for (emp, exact) in s.coordinate_means().iter().zip(m.values()) {
        let se = ((1.0 - exact * exact) / count as f64).sqrt();
        assert!((emp - exact).abs() <= 3.0 * se, "{emp} vs {exact}");
    }
}

#[test]
fn same_law_batches_stay_below_calibration_threshold() {
    let n = 10;
    let a = sample_goe(n, 21).unwrap();
    let g = exact_build(&a, &vec![0.0; n], 0.3).unwrap();
    let b1 = exact_sample(&g, 2000, 1).unwrap();
    let b2 = exact_sample(&g, 2000, 2).unwrap();
    let cost = w2_empirical(&b1, &b2).unwrap().cost;
    let threshold = permutation_threshold(&b1, &b2, 40, 0.99, 3).unwrap();
    assert!(cost <= threshold, "{cost} > {threshold}");
}

#[test]
fn same_law_distance_halves_when_batch_quadruples() {
    let n = 8;
    let a = sample_goe(n, 31).unwrap();
    let g = exact_build(&a, &vec![0.0; n], 0.3).unwrap();
    let costs = w2_consistency(&g, &[100, 400, 1600], 5, 9).unwrap();
    for w in costs.windows(2) {
        let ratio = w[1].1 / w[0].1;
        assert!((0.35..=0.65).contains(&ratio), "m {} -> {}: ratio {ratio}", w[0].0, w[1].0);
    }
}

#[test]
fn glauber_is_comparable_to_the_localization_sampler() {
    let (n, beta, batch) = (10, 0.3, 2000);
    let a = sample_goe(n, 41).unwrap();
    let g = exact_build(&a, &vec![0.0; n], beta).unwrap();
    let exact = exact_sample(&g, batch, 42).unwrap();
    let glauber = glauber_run(&a, beta, 10_000, batch, 43).unwrap();
    let glauber_w2 = w2_empirical(&glauber, &exact).unwrap().w2();

    let plan = RunPlan::new(RunConfig {
        beta,
        n,
        delta: 0.02,
        big_l: 500,
        seed: 44,
        ..RunConfig::default()
    })
    .unwrap();
    let cmp = compare_to_exact(&a, &plan, batch, &[500], batch, 42).unwrap();
    let sl_w2 = cmp.algorithm_at(0).mean;
    assert!(glauber_w2 <= sl_w2 + 0.05, "glauber {glauber_w2} vs sampler {sl_w2}");
}

#[test]
fn free_energy_derivative_matches_overlap_identity() {
    let check = free_energy_derivative_probe(&FreeEnergyDerivativeOptions {
        seed: 3,
        ..FreeEnergyDerivativeOptions::default()
    })
    .unwrap();
    assert!(
        check.pass,
        "finite difference {} vs prediction {} (se {})",
        check.finite_difference, check.predicted, check.difference_se
    );
}

#[test]
fn overlap_functional_is_lipschitz_in_w2() {
    let checks = overlap_lipschitz_probe(&OverlapLipschitzOptions {
        seed: 5,
        ..OverlapLipschitzOptions::default()
    })
    .unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert!(c.pass, "gap {} exceeds W2 {}", c.gap, c.w2);
    }
}
