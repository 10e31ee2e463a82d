//! Quick self-check of the oracles and kernels against independent
//! recomputations, reported as a list of `{check_name, value, bound, pass}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::amp::amp_run;
use crate::disorder::sample_goe;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::magnetization::MagnetizationVector;
use crate::oracle::{
    exact_build, exact_mean, exact_sample, heat_bath_probability, log_z_sk, log_z_sk_estimate, spin_of, w2_empirical,
    AisOptions, MAX_EXACT_N,
};
use crate::rng::{derive_seed, Purpose, Streams};
use crate::sampler::{localize, EmpiricalSample, RunConfig, RunPlan};
use crate::state_evolution::{gamma_star, mmse, Quadrature};
use crate::tap::{bregman, mirror_step_check, tap_free_energy, tap_gradient, TapContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check_name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            check_name: name.to_string(),
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Run every check on systems of size `n` (enumeration capped at 16 spins).
pub fn run_verification(n: usize, seed: u64) -> Result<VerifyReport> {
    if n < 3 || n > MAX_EXACT_N {
        return Err(Error::invalid("n", format!("verify needs 3 <= n <= {MAX_EXACT_N}, got {n}")));
    }
    let n = n.min(16);
    let streams = Streams::new(seed);
    let mut rng = streams.rng(Purpose::Experiment, 0, 0);
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| -> Vec<f64> { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
    let a = sample_goe(n, derive_seed(seed, Purpose::Disorder, 0, 0))?;
    let y = gauss(&mut rng, n);
    let beta = 0.3;
    let mut checks = Vec::new();

    // enumeration
    let g = exact_build(&a, &y, beta)?;
    let total: f64 = g.probabilities().iter().sum();
    checks.push(Check::at_most("exact.normalization", (total - 1.0).abs(), 1e-10));
    let mut worst = 0.0f64;
    for code in (0..1usize << n).step_by(((1usize << n) / 512).max(1)) {
        let x: Vec<f64> = (0..n).map(|i| spin_of(code, i)).collect();
        let direct = 0.5 * beta * a.quadratic_form(&x) + x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>();
        worst = worst.max((direct - g.log_weights()[code]).abs());
    }
    checks.push(Check::at_most("exact.gray_code_vs_direct", worst, 1e-9));
    let g0 = exact_build(&a, &y, 0.0)?;
    let m0 = exact_mean(&g0);
    let err = m0.values().iter().zip(&y).map(|(m, v)| (m - v.tanh()).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("exact.product_mean", err, 1e-12));

    // exact sampling: coordinate means within 4 SE
    let count = 20_000;
    let s = exact_sample(&g, count, seed)?;
    let m_exact = exact_mean(&g);
    let z = s
        .coordinate_means()
        .iter()
        .zip(m_exact.values())
        .map(|(e, m)| (e - m).abs() / ((1.0 - m * m).max(1e-12) / count as f64).sqrt())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("exact.sample_means_z", z, 4.5));

    // heat-bath detailed balance over all single flips
    let p = g.probabilities();
    let mut db = 0.0f64;
    for code in (0..1usize << n).step_by(((1usize << n) / 256).max(1)) {
        let x: Vec<f64> = (0..n).map(|i| spin_of(code, i)).collect();
        for i in 0..n {
            let f = code ^ (1 << i);
            let xf: Vec<f64> = (0..n).map(|k| spin_of(f, k)).collect();
            let up = heat_bath_probability(&a, Some(&y), beta, &x, i);
            let fwd = if xf[i] > 0.0 { up } else { 1.0 - up };
            let up_b = heat_bath_probability(&a, Some(&y), beta, &xf, i);
            let bwd = if x[i] > 0.0 { up_b } else { 1.0 - up_b };
            db = db.max((p[code] * fwd - p[f] * bwd).abs() / p[code].max(p[f]));
        }
    }
    checks.push(Check::at_most("glauber.detailed_balance_rel", db, 1e-12));

    // partition function
    let a3 = sample_goe(3, derive_seed(seed, Purpose::Disorder, 3, 0))?;
    let naive: f64 = (0..8usize)
        .map(|c| {
            let x: Vec<f64> = (0..3).map(|i| spin_of(c, i)).collect();
            (0.5 * 0.7 * a3.quadratic_form(&x) - 0.49 * 3.0 / 4.0).exp() / 8.0
        })
        .sum();
    checks.push(Check::at_most("log_z_sk.naive_n3", (log_z_sk(&a3, 0.7)? - naive.ln()).abs(), 1e-12));
    checks.push(Check::at_most("log_z_sk.beta_zero", log_z_sk(&a, 0.0)?.abs(), 0.0));
    let exact_lz = log_z_sk(&a, 0.4)?;
    let est = log_z_sk_estimate(&a, 0.4, AisOptions::default(), seed)?;
    checks.push(Check::at_most(
        "log_z_sk.annealed_vs_exact",
        (est.value - exact_lz).abs(),
        0.02 + 4.0 * est.se,
    ));

    // transport
    let half = EmpiricalSample::new(n, s.spins[..100].to_vec(), vec![], None)?;
    checks.push(Check::at_most("w2.identical_batches", w2_empirical(&half, &half)?.cost, 0.0));
    let mut flipped = half.clone();
    flipped.spins[0][0] *= -1;
    let c = w2_empirical(&half, &flipped)?.cost;
    checks.push(Check::at_most("w2.single_flip", (c - 4.0 / (n as f64 * 100.0)).abs(), 1e-15));

    // state evolution
    let quad = Quadrature::default();
    let gs = gamma_star(0.45, 0.5, 1e-12, &quad)?;
    let resid = (gs - 0.45f64.powi(2) * (1.0 - mmse(gs + 0.5, &quad)?)).abs();
    checks.push(Check::at_most("state_evolution.fixed_point_residual", resid, 1e-10));

    // AMP
    let (m1, _) = amp_run(&a, &y, beta, 1)?;
    let e = m1.values().iter().zip(&y).map(|(m, v)| (m - v.tanh()).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("amp.first_iterate_is_tanh_y", e, 1e-15));

    // TAP: finite-difference gradient and mirror step
    let m = MagnetizationVector::new(gauss(&mut rng, n).iter().map(|v| 0.6 * v.tanh()).collect())?;
    let ctx = TapContext::new(&a, &y, 0.3, beta)?;
    let grad = tap_gradient(&ctx, &m)?;
    let mut rel = 0.0f64;
    for i in 0..n {
        let bump = |d: f64| {
            let mut v = m.values().to_vec();
            v[i] += d;
            tap_free_energy(&ctx, &MagnetizationVector::new(v).expect("interior"))
        };
        let fd = (bump(1e-6)? - bump(-1e-6)?) / 2e-6;
        rel = rel.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    checks.push(Check::at_most("tap.gradient_finite_difference", rel, 1e-5));
    checks.push(Check::at_most("tap.mirror_step", mirror_step_check(&ctx, &m, 0.1)?, 1e-10));
    let other = MagnetizationVector::new(gauss(&mut rng, n).iter().map(|v| 0.8 * v.tanh()).collect())?;
    let d = bregman(&m, &other)?;
    checks.push(Check::at_most("tap.bregman_lower", dist_sq(m.values(), other.values()) / 2.0 - d, 1e-12));
    let du: Vec<f64> = m.fields().iter().zip(other.fields()).map(|(p, q)| p - q).collect();
    checks.push(Check::at_most("tap.bregman_upper", d - norm_sq(&du), 1e-12));

    // sampler at β = 0 tracks tanh(ŷ)
    let plan = RunPlan::new(RunConfig {
        beta: 0.0,
        n,
        big_l: 10,
        seed,
        ..RunConfig::default()
    })?;
    let traj = localize(&a, &plan)?;
    let e = traj
        .y_path
        .iter()
        .zip(&traj.m_path)
        .flat_map(|(y, m)| y.iter().zip(m.values()).map(|(a, b)| (a.tanh() - b).abs()))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("sampler.decoupled_at_zero_beta", e, 1e-15));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        n,
        seed,
        checks,
        all_pass,
    })
}
