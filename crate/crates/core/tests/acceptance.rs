//! Acceptance suite: one line per criterion, exit status 1 if any fails.
//!
//! `SKLOC_ACCEPT=3,8` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use skloc_core::amp::{amp_lipschitz_probe, amp_run};
use skloc_core::disorder::{operator_norm, sample_goe, sample_planted, CouplingMatrix};
use skloc_core::experiments::{
    bench, compare_to_exact, covariance_probe, martingale_probe, mean, rounding_contraction_probe, run_chaos,
    run_stability, ChaosOptions, CovarianceOptions, MartingaleOptions, RoundingOptions,
};
use skloc_core::linalg::{dist_sq, norm, norm_sq};
use skloc_core::oracle::{log_z_sk_estimate, AisOptions};
use skloc_core::rng::{derive_seed, Purpose, Streams};
use skloc_core::sampler::{RunConfig, RunPlan};
use skloc_core::state_evolution::{gamma_iterates, gamma_star, Quadrature};
use skloc_core::tap::{
    bregman, convexity_probe, mirror_step_check, tap_free_energy, tap_gradient, tap_hessian_apply, TapContext,
};
use skloc_core::MagnetizationVector;

type Outcome = Result<(bool, String), skloc_core::Error>;

fn rng(tag: u64) -> ChaCha8Rng {
    Streams::new(0xACCE97).rng(Purpose::Experiment, tag, 0)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_magnetization(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> MagnetizationVector {
    MagnetizationVector::new((0..n).map(|_| cap * (2.0 * rng.random::<f64>() - 1.0)).collect()).unwrap()
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

fn c1_sandwich() -> Outcome {
    let quad = Quadrature::default();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    let tol = 1e-8;
    for &beta in &linspace(0.1, 0.49, 5) {
        for &t in &linspace(0.1, 2.0, 5) {
            let gs = gamma_star(beta, t, 1e-13, &quad)?;
            let it = gamma_iterates(beta, t, 40, &quad)?;
            for (k, g) in it.iter().enumerate() {
                let r = g / gs;
                worst_low = worst_low.min(r - (1.0 - beta.powi(2 * k as i32)));
                worst_high = worst_high.max(r - 1.0);
            }
        }
    }
    Ok((
        worst_low >= -tol && worst_high <= tol,
        format!("min(ratio - lower) = {worst_low:.3e}, max(ratio - 1) = {worst_high:.3e}"),
    ))
}

fn c2_fixed_point_lipschitz() -> Outcome {
    let quad = Quadrature::default();
    let mut r = rng(2);
    let mut worst = f64::NEG_INFINITY;
    for &beta in &[0.3, 0.45] {
        let lip = beta * beta / (1.0 - beta * beta);
        for _ in 0..50 {
            let t1 = 0.01 + 1.99 * r.random::<f64>();
            let t2 = 0.01 + 1.99 * r.random::<f64>();
            let d = (gamma_star(beta, t1, 1e-13, &quad)? - gamma_star(beta, t2, 1e-13, &quad)?).abs();
            worst = worst.max(d / (lip * (t1 - t2).abs()));
        }
    }
    Ok((worst <= 1.0 + 1e-8, format!("max |Δγ*| / (β²/(1-β²) |Δt|) = {worst:.4}")))
}

struct PlantedRun {
    t: f64,
    x0: Vec<f64>,
    y: Vec<f64>,
    beta: f64,
}

/// Five planted instances at n = 4000, each observed at three times.
fn planted_instances(mut visit: impl FnMut(&CouplingMatrix, &PlantedRun) -> skloc_core::Result<()>) -> skloc_core::Result<()> {
    let (n, beta) = (4000, 0.45);
    for inst in 0..5u64 {
        let p = sample_planted(n, beta, 1000 + inst)?;
        for (k, &t) in [0.25, 0.5, 1.0].iter().enumerate() {
            let mut r = Streams::new(inst).rng(Purpose::Field, k as u64, 0);
            let g = gaussian(&mut r, n);
            let y: Vec<f64> = p.x0.iter().zip(&g).map(|(x, g)| t * x + t.sqrt() * g).collect();
            visit(
                &p.matrix,
                &PlantedRun {
                    t,
                    x0: p.x0.clone(),
                    y,
                    beta,
                },
            )?;
        }
    }
    Ok(())
}

fn c3_amp_state_evolution() -> Outcome {
    let quad = Quadrature::default();
    let k = 20;
    let mut worst_norm = 0.0f64;
    let mut worst_overlap = 0.0f64;
    let mut index_gap = 0.0f64;
    planted_instances(|a, run| {
        let n = run.y.len() as f64;
        let gam = gamma_iterates(run.beta, run.t, k + 1, &quad)?;
        let b2 = run.beta * run.beta;
        // m^k = tanh(z^k) carries γ_k; the next index differs by < β^{2k}
        let q = gam[k] / b2;
        index_gap = index_gap.max((gam[k + 1] / b2 - q).abs());
        let (m, _) = amp_run(a, &run.y, run.beta, k)?;
        let nm = norm_sq(m.values()) / n;
        let ov = m.values().iter().zip(&run.x0).map(|(a, b)| a * b).sum::<f64>() / n;
        worst_norm = worst_norm.max((nm - q).abs());
        worst_overlap = worst_overlap.max((ov - q).abs());
        Ok(())
    })?;
    Ok((
        worst_norm <= 0.05 && worst_overlap <= 0.05,
        format!(
            "max |‖m‖²/n - q_k| = {worst_norm:.4}, max |<m,x0>/n - q_k| = {worst_overlap:.4} (q_k vs q_(k+1) differ by {index_gap:.1e})"
        ),
    ))
}

fn c4_tap_stationarity() -> Outcome {
    let quad = Quadrature::default();
    let mut worst = 0.0f64;
    planted_instances(|a, run| {
        let q = gamma_star(run.beta, run.t, 1e-12, &quad)? / (run.beta * run.beta);
        let (m, _) = amp_run(a, &run.y, run.beta, 25)?;
        let ctx = TapContext::new(a, &run.y, q, run.beta)?;
        let g = tap_gradient(&ctx, &m)?;
        worst = worst.max(norm(&g) / (run.t * run.y.len() as f64).sqrt());
        Ok(())
    })?;
    Ok((worst <= 0.1, format!("max ‖∇F_TAP(m^25)‖/√(tn) = {worst:.4}")))
}

fn c5_derivatives() -> Outcome {
    let mut r = rng(5);
    let n = 50;
    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for trial in 0..20u64 {
        let a = sample_goe(n, 500 + trial)?;
        let y = gaussian(&mut r, n);
        let q = r.random::<f64>();
        let beta = 0.1 + 0.4 * r.random::<f64>();
        let ctx = TapContext::new(&a, &y, q, beta)?;
        let m = random_magnetization(&mut r, n, 0.9);
        let g = tap_gradient(&ctx, &m)?;
        let h = 1e-6;
        for i in 0..n {
            let shifted = |d: f64| {
                let mut v = m.values().to_vec();
                v[i] += d;
                tap_free_energy(&ctx, &MagnetizationVector::new(v).unwrap())
            };
            let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
            worst_grad = worst_grad.max((fd - g[i]).abs() / g[i].abs().max(1e-3));
        }
        let v = gaussian(&mut r, n);
        let hv = tap_hessian_apply(&ctx, &m, &v)?;
        let eps = 1e-6;
        let along = |s: f64| {
            let vals: Vec<f64> = m.values().iter().zip(&v).map(|(a, b)| a + s * b).collect();
            tap_gradient(&ctx, &MagnetizationVector::new(vals).unwrap())
        };
        let (gp, gm) = (along(eps)?, along(-eps)?);
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * eps);
            worst_hess = worst_hess.max((fd - hv[i]).abs() / hv[i].abs().max(1e-3));
        }
    }
    // sandwich at n = 300, β = 0.3
    let n = 300;
    let beta = 0.3;
    let a = sample_goe(n, 77)?;
    let op = operator_norm(&a, 1e-10)?;
    let y = gaussian(&mut r, n);
    let ctx = TapContext::new(&a, &y, 0.4, beta)?;
    let m = random_magnetization(&mut r, n, 0.9);
    let (lo, hi) = convexity_probe(&ctx, &m, 50, 9)?;
    let (lower, upper) = (1.0 - beta * op, 1.0 + beta * beta + beta * op);
    let pass = worst_grad <= 1e-5 && worst_hess <= 1e-5 && lo >= lower && hi <= upper;
    Ok((
        pass,
        format!(
            "grad rel err {worst_grad:.2e}, Hessian rel err {worst_hess:.2e}, Rayleigh ratios [{lo:.4}, {hi:.4}] within [{lower:.4}, {upper:.4}]"
        ),
    ))
}

fn c6_mirror() -> Outcome {
    let mut r = rng(6);
    let n = 50;
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let a = sample_goe(n, 600 + trial)?;
        let y = gaussian(&mut r, n);
        let ctx = TapContext::new(&a, &y, r.random::<f64>(), 0.45 * r.random::<f64>())?;
        let m = random_magnetization(&mut r, n, 0.95);
        let eta = 0.05 + 0.2 * r.random::<f64>();
        worst = worst.max(mirror_step_check(&ctx, &m, eta)?);
    }
    Ok((worst <= 1e-10, format!("max sup-norm gap = {worst:.2e}")))
}

fn c7_bregman() -> Outcome {
    let mut r = rng(7);
    let n = 100;
    let mut lower_slack = f64::INFINITY;
    let mut upper_slack = f64::INFINITY;
    for _ in 0..1000 {
        let cap = 1.0 - 10f64.powf(-1.0 - 5.0 * r.random::<f64>());
        let m = random_magnetization(&mut r, n, cap);
        let p = random_magnetization(&mut r, n, cap);
        let d = bregman(&m, &p)?;
        let lo = dist_sq(m.values(), p.values()) / 2.0;
        let du: Vec<f64> = m.fields().iter().zip(p.fields()).map(|(a, b)| a - b).collect();
        let hi = norm_sq(&du);
        lower_slack = lower_slack.min((d - lo) / d.max(1e-300));
        upper_slack = upper_slack.min((hi - d) / d.max(1e-300));
    }
    Ok((
        lower_slack >= -1e-12 && upper_slack >= -1e-12,
        format!("min relative slack: lower {lower_slack:.3e}, upper {upper_slack:.3e}"),
    ))
}

fn c8_end_to_end() -> Outcome {
    let (n, beta) = (10, 0.3);
    let cfg = RunConfig {
        beta,
        n,
        delta: 0.02,
        big_l: 500,
        seed: 8,
        ..RunConfig::default()
    };
    let plan = RunPlan::new(cfg)?;
    let a = sample_goe(n, 88)?;
    // T = 1, 4, 10 are prefixes of the L = 500 trajectory
    let cmp = compare_to_exact(&a, &plan, 20_000, &[50, 200, 500], 2000, 808)?;
    let adv = cmp.advantage_over_uniform(2);
    let w: Vec<_> = (0..3).map(|h| cmp.algorithm_at(h)).collect();
    let u = cmp.uniform_estimate();
    let b = cmp.baseline_estimate();
    let (d1, d2) = (cmp.improvement(0), cmp.improvement(1));
    let pass = adv.mean > 3.0 * adv.se && cmp.decreasing_in_horizon();
    Ok((
        pass,
        format!(
            "W2 alg T=1,4,10: {:.4}±{:.4}, {:.4}±{:.4}, {:.4}±{:.4}; uniform {:.4}±{:.4}; exact floor {:.4}±{:.4}; advantage {:.4} ({:.1} SE); paired drop T1→4 {:.4}±{:.4}, T4→10 {:.4}±{:.4}",
            w[0].mean, w[0].se, w[1].mean, w[1].se, w[2].mean, w[2].se, u.mean, u.se, b.mean, b.se, adv.mean,
            adv.mean / adv.se, d1.mean, d1.se, d2.mean, d2.se
        ),
    ))
}

fn c9_martingale_covariance() -> Outcome {
    let mart = martingale_probe(&MartingaleOptions {
        seed: 9,
        ..MartingaleOptions::default()
    })?;
    let cov = covariance_probe(&CovarianceOptions {
        seed: 9,
        ..CovarianceOptions::default()
    })?;
    let mut s = String::new();
    for m in &mart {
        s.push_str(&format!("martingale t={}: max z {:.2}; ", m.t, m.max_z));
    }
    for c in &cov {
        s.push_str(&format!(
            "λmax(E cov) t={}: {:.4} ± {:.4} vs 1/t = {:.3} (mean λmax {:.3}); ",
            c.t, c.top_eigenvalue, c.se, c.bound, c.mean_top_eigenvalue
        ));
    }
    Ok((mart.iter().all(|m| m.pass) && cov.iter().all(|c| c.pass), s))
}

/// Partner of `a` for antithetic sampling: the off-diagonal radius `R`, with
/// `n R² ~ χ²_d`, is reflected in quantile (Wilson–Hilferty transform) and the
/// diagonal is taken from `fresh`. Both pieces are independent of the
/// off-diagonal direction, so the result is again GOE.
fn radial_partner(a: &CouplingMatrix, fresh: &CouplingMatrix) -> skloc_core::Result<CouplingMatrix> {
    let n = a.n();
    let nf = n as f64;
    let d = nf * (nf - 1.0) / 2.0;
    let chi2: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| a.get(i, j).powi(2)).sum::<f64>() * nf;
    let (mu, sd) = (1.0 - 2.0 / (9.0 * d), (2.0 / (9.0 * d)).sqrt());
    let z = ((chi2 / d).cbrt() - mu) / sd;
    let reflected = d * (mu - z * sd).powi(3);
    let scale = (reflected / chi2).sqrt();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(if i == j { fresh.get(i, i) } else { scale * a.get(i, j) });
        }
    }
    CouplingMatrix::from_entries(n, entries)
}

fn c10_alr() -> Outcome {
    let (n, beta, draws) = (600, 0.4, 200);
    let sigma2 = -(1.0f64 - beta * beta).ln() / 4.0;
    let mut values = Vec::with_capacity(draws);
    let mut se_max = 0.0f64;
    for d in 0..draws / 4 {
        let a = sample_goe(n, derive_seed(10, Purpose::Disorder, d as u64, 0))?;
        let fresh = sample_goe(n, derive_seed(10, Purpose::Disorder, d as u64, 1))?;
        let b = radial_partner(&a, &fresh)?;
        // -A is GOE as well; each group of four shares one off-diagonal direction
        let group = [a.combine(-1.0, &a, 0.0)?, b.combine(-1.0, &b, 0.0)?, a, b];
        for (k, m) in group.iter().enumerate() {
            let est = log_z_sk_estimate(m, beta, AisOptions::default(), (4 * d + k) as u64)?;
            se_max = se_max.max(est.se);
            values.push(est.value);
        }
    }
    let mu = mean(&values);
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0);
    // groups are not independent, so the mean's SE comes from group averages
    let groups: Vec<f64> = values.chunks(4).map(mean).collect();
    let gm = mean(&groups);
    let mean_se = (groups.iter().map(|v| (v - gm).powi(2)).sum::<f64>() / ((groups.len() * (groups.len() - 1)) as f64)).sqrt();
    let mean_ok = (mu + sigma2).abs() <= 0.3 * sigma2;
    let var_ok = (var - 2.0 * sigma2).abs() <= 0.3 * 2.0 * sigma2;
    Ok((
        mean_ok && var_ok,
        format!(
            "mean {mu:.5} ± {mean_se:.5} vs -σ² = {:.5}; variance {var:.5} vs 2σ² = {:.5}; max AIS se {se_max:.4}",
            -sigma2,
            2.0 * sigma2
        ),
    ))
}

fn c11_chaos() -> Outcome {
    let r = run_chaos(&ChaosOptions {
        seed: 11,
        ..ChaosOptions::default()
    })?;
    let gap = r.endpoint_gap();
    let last = r.w2_lower.len() - 1;
    let w2_gap = r.w2_lower[last] - r.w2_lower[0];
    let pass = r.overlap_sq.windows(2).all(|w| w[1] < w[0]) && gap > 3.0 * r.endpoint_gap_se && w2_gap > 3.0 * r.w2_gap_se;
    let w2 = format!(
        "; W2 s=0: {:.4}, s=0.6: {:.4}, gap = {:.1} SE",
        r.w2_lower[0],
        r.w2_lower[last],
        w2_gap / r.w2_gap_se
    );
    Ok((
        pass,
        format!(
            "overlap_sq {:?}; endpoint gap {gap:.4} = {:.1} SE{w2}",
            r.overlap_sq.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            gap / r.endpoint_gap_se
        ),
    ))
}

fn c12_stability() -> Outcome {
    let cfg = RunConfig {
        beta: 0.3,
        n: 500,
        seed: 12,
        ..RunConfig::default()
    };
    let rec = run_stability(&cfg, &[0.0, 0.01, 0.05, 0.2], &[0.3, 0.31], 20)?;
    let d = &rec.curves["disorder"];
    let t = &rec.curves["temperature"];
    let pass = d.y[1] <= 0.1 && d.is_nondecreasing() && t.y[1] <= 0.1 && t.is_nondecreasing();
    Ok((
        pass,
        format!(
            "disorder s=0,0.01,0.05,0.2: {:?}; temperature β'=0.31: {:.4}",
            d.y.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            t.y[1]
        ),
    ))
}

fn c13_bench() -> Outcome {
    let cfg = RunConfig {
        big_l: 10,
        seed: 13,
        ..RunConfig::default()
    };
    let (r, _) = bench(&[500, 1000, 2000], &cfg, 2)?;
    let slope = r.slope.unwrap_or(f64::NAN);
    let times: Vec<String> = r.points.iter().map(|p| format!("n={}: {:.3}s", p.n, p.seconds)).collect();
    Ok(((1.7..=2.3).contains(&slope), format!("slope {slope:.3} ({})", times.join(", "))))
}

/// Straightforward AMP written independently of the library.
fn amp_reference(a: &CouplingMatrix, y: &[f64], beta: f64, k: usize) -> Vec<f64> {
    let n = y.len();
    let mut z = vec![0.0; n];
    let mut m_prev = vec![0.0; n];
    for _ in 0..k {
        let m: Vec<f64> = z.iter().map(|v: &f64| v.tanh()).collect();
        let b = beta * beta / n as f64 * m.iter().map(|v| 1.0 - v * v).sum::<f64>();
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let am: f64 = (0..n).map(|j| a.get(i, j) * m[j]).sum();
                beta * am + y[i] - b * m_prev[i]
            })
            .collect();
        m_prev = m;
        z = next;
    }
    z
}

fn c14_amp_lipschitz() -> Outcome {
    let (n, k, beta) = (200, 3, 0.45);
    let mut r = rng(14);
    let mut worst = 0.0f64;
    let mut dual_gap = 0.0f64;
    for p in 0..20u64 {
        let a = sample_goe(n, 1400 + p)?;
        let op = operator_norm(&a, 1e-5)?;
        if op > 3.0 {
            return Ok((false, format!("instance {p} has ‖A‖ = {op:.3} > 3")));
        }
        let y1 = gaussian(&mut r, n);
        let y2 = gaussian(&mut r, n);
        let ratio = amp_lipschitz_probe(&a, &y1, &y2, beta, k)?;
        let z1 = amp_reference(&a, &y1, beta, k);
        let z2 = amp_reference(&a, &y2, beta, k);
        let reference = dist_sq(&z1, &z2).sqrt() / dist_sq(&y1, &y2).sqrt();
        dual_gap = dual_gap.max((ratio - reference).abs() / reference);
        worst = worst.max(ratio);
    }
    let bound = k as f64 * 6f64.powi(k as i32);
    Ok((
        worst <= bound && dual_gap <= 1e-10,
        format!("max ratio {worst:.4} ≤ {bound}; independent recomputation agrees to {dual_gap:.1e}"),
    ))
}

fn c15_rounding() -> Outcome {
    let checks = rounding_contraction_probe(&RoundingOptions {
        seed: 15,
        ..RoundingOptions::default()
    })?;
    let worst = checks
        .iter()
        .map(|c| c.w2_rounded - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: Vec<String> = checks
        .iter()
        .map(|c| format!("{:.3}≤{:.3}", c.w2_rounded, c.bound))
        .collect();
    Ok((checks.iter().all(|c| c.pass), format!("W2(rounded) vs 2√W2(means): {}; worst margin {worst:.3}", s.join(" "))))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 15] = [
        (1, "state-evolution sandwich", c1_sandwich),
        (2, "fixed-point Lipschitz bound", c2_fixed_point_lipschitz),
        (3, "AMP matches state evolution", c3_amp_state_evolution),
        (4, "TAP stationarity of AMP", c4_tap_stationarity),
        (5, "gradient/Hessian correctness", c5_derivatives),
        (6, "mirror-descent equivalence", c6_mirror),
        (7, "Bregman bounds", c7_bregman),
        (8, "end-to-end small-n sampling", c8_end_to_end),
        (9, "martingale and covariance probes", c9_martingale_covariance),
        (10, "ALR fluctuations", c10_alr),
        (11, "disorder chaos trend", c11_chaos),
        (12, "algorithmic stability", c12_stability),
        (13, "complexity scaling", c13_bench),
        (14, "AMP Lipschitz bound", c14_amp_lipschitz),
        (15, "rounding contraction", c15_rounding),
    ];
    let only: Option<Vec<u32>> = std::env::var("SKLOC_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failures = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {id:>2}. {name} ({secs:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
