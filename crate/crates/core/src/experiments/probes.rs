//! Monte Carlo checks of the structural facts the sampler relies on, all
//! against exact enumeration.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{interpolate, sample_goe, DisorderPath};
use crate::error::{Error, Result};
use crate::linalg::psd_top_eigenvalue;
use crate::oracle::{covariance, exact_build, exact_mean, exact_sample, second_moment, w2_empirical, w2_points, ExactGibbs};
use crate::rng::{derive_seed, Purpose, Streams};
use crate::sampler::{round_with, run_replicas, RunConfig, RunPlan};

use super::record::{bootstrap_se, bootstrap_se_with, mean, BOOTSTRAP_RESAMPLES};

fn gaussian(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draw `x* ~ μ_A` exactly; the localization process is `y(t) = t x* + B(t)`.
fn planted_spin(g: &ExactGibbs, seed: u64) -> Result<Vec<f64>> {
    let s = exact_sample(g, 1, seed)?;
    Ok(s.spins[0].iter().map(|&v| v as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleOptions {
    pub n: usize,
    pub beta: f64,
    pub times: Vec<f64>,
    /// Length of the continuation interval.
    pub dt: f64,
    pub continuations: usize,
    pub seed: u64,
}

impl Default for MartingaleOptions {
    fn default() -> Self {
        Self {
            n: 12,
            beta: 0.3,
            times: vec![0.5, 1.0],
            dt: 0.5,
            continuations: 2000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub t: f64,
    /// `|mean of m(y(t+Δ)) - m(y(t))| / SE` per coordinate.
    pub z: Vec<f64>,
    pub max_z: f64,
    pub pass: bool,
}

/// The exact tilted mean along the localization process is a martingale:
/// averaging `m(A, y(t+Δ))` over continuations from `y(t)` recovers `m(A, y(t))`.
pub fn martingale_probe(opts: &MartingaleOptions) -> Result<Vec<MartingaleCheck>> {
    if opts.continuations < 2 || !(opts.dt > 0.0) {
        return Err(Error::invalid("continuations", "need at least 2 continuations and dt > 0"));
    }
    let n = opts.n;
    let a = sample_goe(n, derive_seed(opts.seed, Purpose::Disorder, 0, 3))?;
    let g0 = exact_build(&a, &vec![0.0; n], opts.beta)?;
    let streams = Streams::new(opts.seed);
    opts.times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let x_star = planted_spin(&g0, derive_seed(opts.seed, Purpose::Exact, k as u64, 0))?;
            let noise = gaussian(n, &mut streams.rng(Purpose::Field, k as u64, 0));
            let y: Vec<f64> = x_star.iter().zip(&noise).map(|(x, g)| t * x + t.sqrt() * g).collect();
            let gt = exact_build(&a, &y, opts.beta)?;
            let m_t = exact_mean(&gt);
            let draws = exact_sample(&gt, opts.continuations, derive_seed(opts.seed, Purpose::Exact, k as u64, 1))?;
            let futures: Vec<Vec<f64>> = draws
                .spins
                .par_iter()
                .enumerate()
                .map(|(c, x)| {
                    let mut rng = streams.rng(Purpose::Brownian, k as u64, c as u64);
                    let y2: Vec<f64> = y
                        .iter()
                        .zip(x)
                        .map(|(&yi, &xi)| yi + opts.dt * xi as f64 + opts.dt.sqrt() * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    Ok(exact_mean(&exact_build(&a, &y2, opts.beta)?).into_values())
                })
                .collect::<Result<_>>()?;
            let c = futures.len() as f64;
            let z: Vec<f64> = (0..n)
                .map(|i| {
                    let col: Vec<f64> = futures.iter().map(|m| m[i]).collect();
                    let mu = mean(&col);
                    let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (c - 1.0)).sqrt();
                    (mu - m_t.values()[i]).abs() / (sd / c.sqrt())
                })
                .collect();
            let max_z = z.iter().cloned().fold(0.0, f64::max);
            Ok(MartingaleCheck {
                t,
                pass: max_z <= 3.0,
                z,
                max_z,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceOptions {
    pub n: usize,
    pub beta: f64,
    pub times: Vec<f64>,
    pub disorder_samples: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self {
            n: 12,
            beta: 0.3,
            times: vec![1.0, 2.0, 4.0],
            disorder_samples: 100,
            paths: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub t: f64,
    /// `λ_max` of the disorder-and-path averaged covariance.
    pub top_eigenvalue: f64,
    /// Bootstrap SE of `top_eigenvalue` over disorder draws.
    pub se: f64,
    /// Average of the per-measure `λ_max`, for reference.
    pub mean_top_eigenvalue: f64,
    pub mean_top_eigenvalue_se: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Covariance decay along the localization process: `E cov(μ_t) ⪯ I/t`,
/// tested as `λ_max(E cov) ≤ 1/t + 3 SE`.
pub fn covariance_probe(opts: &CovarianceOptions) -> Result<Vec<CovarianceCheck>> {
    let n = opts.n;
    if opts.disorder_samples < 2 || opts.paths == 0 {
        return Err(Error::invalid("disorder_samples", "need at least 2 draws and 1 path"));
    }
    let mut times = opts.times.clone();
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("times", "must be positive"));
    }
    times.sort_by(f64::total_cmp);
    let streams = Streams::new(opts.seed);
    // per draw: (per-time path-averaged covariance, per-time mean λ_max)
    let per_draw: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..opts.disorder_samples)
        .into_par_iter()
        .map(|d| {
            let a = sample_goe(n, derive_seed(opts.seed, Purpose::Disorder, d as u64, 5))?;
            let g0 = exact_build(&a, &vec![0.0; n], opts.beta)?;
            let mut covs = vec![vec![0.0; n * n]; times.len()];
            let mut lams = vec![0.0; times.len()];
            for p in 0..opts.paths {
                let x_star = planted_spin(&g0, derive_seed(opts.seed, Purpose::Exact, d as u64, p as u64))?;
                let mut rng = streams.rng(Purpose::Brownian, d as u64, p as u64);
                let mut b = vec![0.0; n];
                let mut t_prev = 0.0;
                for (k, &t) in times.iter().enumerate() {
                    let sd = (t - t_prev).sqrt();
                    for bi in b.iter_mut() {
                        *bi += sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    t_prev = t;
                    let y: Vec<f64> = x_star.iter().zip(&b).map(|(x, bi)| t * x + bi).collect();
                    let c = covariance(&exact_build(&a, &y, opts.beta)?);
                    lams[k] += psd_top_eigenvalue(&c, n, 10_000, 1e-12) / opts.paths as f64;
                    for (acc, v) in covs[k].iter_mut().zip(&c) {
                        *acc += v / opts.paths as f64;
                    }
                }
            }
            Ok((covs, lams))
        })
        .collect::<Result<_>>()?;

    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mats: Vec<&Vec<f64>> = per_draw.iter().map(|(c, _)| &c[k]).collect();
            let top = |ms: &[&Vec<f64>]| {
                let mut avg = vec![0.0; n * n];
                for m in ms {
                    for (a, v) in avg.iter_mut().zip(m.iter()) {
                        *a += v;
                    }
                }
                avg.iter_mut().for_each(|a| *a /= ms.len() as f64);
                psd_top_eigenvalue(&avg, n, 10_000, 1e-12)
            };
            let top_eigenvalue = top(&mats);
            let se = bootstrap_se_with(&mats, top, BOOTSTRAP_RESAMPLES, opts.seed ^ k as u64);
            let lams: Vec<f64> = per_draw.iter().map(|(_, l)| l[k]).collect();
            let bound = 1.0 / t;
            CovarianceCheck {
                t,
                top_eigenvalue,
                se,
                mean_top_eigenvalue: mean(&lams),
                mean_top_eigenvalue_se: bootstrap_se(&lams, opts.seed ^ (k as u64 + 77)),
                bound,
                pass: top_eigenvalue <= bound + 3.0 * se,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingOptions {
    pub n: usize,
    pub config: RunConfig,
    pub pairs: usize,
    /// Mean vectors per law.
    pub batch: usize,
    /// Pair `p` perturbs the disorder by `s = max_perturbation · (p+1)/pairs`.
    pub max_perturbation: f64,
    /// Independent rounding repetitions for the coupling estimate.
    pub roundings: usize,
    pub seed: u64,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        Self {
            n: 10,
            config: RunConfig {
                beta: 0.3,
                n: 10,
                delta: 0.05,
                big_l: 40,
                ..RunConfig::default()
            },
            pairs: 10,
            batch: 300,
            max_perturbation: 0.5,
            roundings: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingCheck {
    pub s: f64,
    /// `W_{2,n}` between the two empirical laws of mean vectors.
    pub w2_means: f64,
    /// `W_{2,n}` upper bound between the rounded laws from the shared-uniform
    /// coupling along the optimal mean matching.
    pub w2_rounded: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Rounding contracts distances: `W(round μ₁, round μ₂) ≤ 2 sqrt(W(μ₁, μ₂))`.
///
/// `μ₁, μ₂` are the empirical laws of sampler output means on `A_0` and a
/// perturbed `A_s`, driven by the same noise. The left side is bounded by
/// rounding matched means with shared uniforms, which is a coupling of the
/// rounded laws.
pub fn rounding_contraction_probe(opts: &RoundingOptions) -> Result<Vec<RoundingCheck>> {
    if opts.pairs == 0 || opts.batch == 0 || opts.roundings < 2 {
        return Err(Error::invalid("pairs", "need pairs, batch >= 1 and roundings >= 2"));
    }
    let cfg = RunConfig {
        n: opts.n,
        ..opts.config.clone()
    };
    let plan = RunPlan::new(cfg.clone())?;
    let streams = Streams::new(opts.seed);
    (0..opts.pairs)
        .map(|p| {
            let s = opts.max_perturbation * (p + 1) as f64 / opts.pairs as f64;
            let path = DisorderPath::sample(opts.n, derive_seed(opts.seed, Purpose::Disorder, p as u64, 9))?;
            let pp = plan.reseeded(derive_seed(opts.seed, Purpose::Experiment, p as u64, 9));
            let l = cfg.big_l;
            let m1 = run_replicas(path.a0(), &pp, opts.batch, &[l])?;
            let m2 = run_replicas(&interpolate(&path, s)?, &pp, opts.batch, &[l])?;
            let v1: Vec<Vec<f64>> = m1.iter().map(|o| o.means[0].values().to_vec()).collect();
            let v2: Vec<Vec<f64>> = m2.iter().map(|o| o.means[0].values().to_vec()).collect();
            let plan_means = w2_points(&v1, &v2)?;
            let w2_means = plan_means.w2();
            let costs: Vec<f64> = (0..opts.roundings)
                .map(|r| {
                    let mut total = 0usize;
                    for (i, &j) in plan_means.assignment.iter().enumerate() {
                        let seed_rng = || streams.rng(Purpose::Rounding, p as u64, (r * opts.batch + i) as u64);
                        let x = round_with(&m1[i].means[0], &mut seed_rng());
                        let xp = round_with(&m2[j].means[0], &mut seed_rng());
                        total += x.iter().zip(&xp).filter(|(a, b)| a != b).count();
                    }
                    4.0 * total as f64 / (opts.n * opts.batch) as f64
                })
                .collect();
            let mc = mean(&costs);
            let sd = (costs.iter().map(|c| (c - mc).powi(2)).sum::<f64>() / (costs.len() as f64 - 1.0)).sqrt();
            let w2_rounded = mc.sqrt();
            // delta method for the square root
            let se = if mc > 0.0 {
                sd / (costs.len() as f64).sqrt() / (2.0 * w2_rounded)
            } else {
                0.0
            };
            let bound = 2.0 * w2_means.sqrt();
            Ok(RoundingCheck {
                s,
                w2_means,
                w2_rounded,
                se,
                bound,
                pass: w2_rounded <= bound + 3.0 * se,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyDerivativeOptions {
    pub n: usize,
    pub beta: f64,
    /// Central finite-difference step in `β`.
    pub h: f64,
    pub draws: usize,
    pub seed: u64,
}

impl Default for FreeEnergyDerivativeOptions {
    fn default() -> Self {
        Self {
            n: 12,
            beta: 0.5,
            h: 1e-3,
            draws: 400,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyDerivativeCheck {
    /// Mean finite difference of `(1/n) log Σ_x exp((β/2)<x,Ax>)`.
    pub finite_difference: f64,
    pub finite_difference_se: f64,
    /// Mean of `(β/2)(1 - <(x¹·x²/n)²>)`.
    pub predicted: f64,
    pub predicted_se: f64,
    /// Mean replica overlap second moment.
    pub overlap_sq: f64,
    pub overlap_sq_se: f64,
    /// SE of the paired difference.
    pub difference_se: f64,
    pub pass: bool,
}

/// Gaussian integration by parts gives
/// `d/dβ (1/n) E log Z = (β/2)(1 - E<(x¹·x²/n)²>)`, exactly at finite `n`.
pub fn free_energy_derivative_probe(opts: &FreeEnergyDerivativeOptions) -> Result<FreeEnergyDerivativeCheck> {
    if opts.draws < 2 || !(opts.h > 0.0) || opts.beta < opts.h {
        return Err(Error::invalid("draws", "need draws >= 2 and 0 < h <= beta"));
    }
    let n = opts.n;
    let zeros = vec![0.0; n];
    let rows: Vec<(f64, f64, f64)> = (0..opts.draws)
        .into_par_iter()
        .map(|d| {
            let a = sample_goe(n, derive_seed(opts.seed, Purpose::Disorder, d as u64, 11))?;
            let f = |b: f64| exact_build(&a, &zeros, b).map(|g| g.log_z() / n as f64);
            let fd = (f(opts.beta + opts.h)? - f(opts.beta - opts.h)?) / (2.0 * opts.h);
            let m2 = second_moment(&exact_build(&a, &zeros, opts.beta)?);
            let q2 = m2.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
            Ok((fd, 0.5 * opts.beta * (1.0 - q2), q2))
        })
        .collect::<Result<_>>()?;
    let fd: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pred: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let q2: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let diff: Vec<f64> = fd.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let difference_se = bootstrap_se(&diff, opts.seed ^ 3);
    Ok(FreeEnergyDerivativeCheck {
        finite_difference: mean(&fd),
        finite_difference_se: bootstrap_se(&fd, opts.seed ^ 1),
        predicted: mean(&pred),
        predicted_se: bootstrap_se(&pred, opts.seed ^ 2),
        overlap_sq: mean(&q2),
        overlap_sq_se: bootstrap_se(&q2, opts.seed ^ 4),
        difference_se,
        pass: mean(&diff).abs() <= 3.0 * difference_se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapLipschitzOptions {
    pub n: usize,
    pub beta: f64,
    /// Size of the field perturbation separating `μ₁` and `μ₂`.
    pub epsilon: f64,
    pub trials: usize,
    pub batch: usize,
    pub slack: f64,
    pub seed: u64,
}

impl Default for OverlapLipschitzOptions {
    fn default() -> Self {
        Self {
            n: 8,
            beta: 0.5,
            epsilon: 0.5,
            trials: 10,
            batch: 2000,
            slack: 0.02,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapLipschitzCheck {
    /// `|f(μ₁,ν) - f(μ₂,ν)|`, exact.
    pub gap: f64,
    /// Assignment estimate of `W_{2,n}(μ₁, μ₂)`.
    pub w2: f64,
    pub pass: bool,
}

/// `f(μ, ν) = E|<x, x'>|/n` for independent `x ~ μ`, `x' ~ ν`.
pub fn mean_abs_overlap(mu: &ExactGibbs, nu: &ExactGibbs) -> f64 {
    let n = mu.n();
    let p = mu.probabilities();
    let q = nu.probabilities();
    let mut acc = 0.0;
    for (a, pa) in p.iter().enumerate() {
        let mut inner = 0.0;
        for (b, qb) in q.iter().enumerate() {
            let agree = n as i64 - 2 * (a ^ b).count_ones() as i64;
            inner += qb * agree.unsigned_abs() as f64;
        }
        acc += pa * inner;
    }
    acc / n as f64
}

/// The mean absolute overlap is 1-Lipschitz in `W_{2,n}`.
pub fn overlap_lipschitz_probe(opts: &OverlapLipschitzOptions) -> Result<Vec<OverlapLipschitzCheck>> {
    let n = opts.n;
    let streams = Streams::new(opts.seed);
    (0..opts.trials)
        .map(|k| {
            let a = sample_goe(n, derive_seed(opts.seed, Purpose::Disorder, k as u64, 13))?;
            let mut rng = streams.rng(Purpose::Field, k as u64, 0);
            let y1 = gaussian(n, &mut rng);
            let y2: Vec<f64> = y1.iter().map(|v| v + opts.epsilon * rng.sample::<f64, _>(StandardNormal)).collect();
            let y3 = gaussian(n, &mut rng);
            let g1 = exact_build(&a, &y1, opts.beta)?;
            let g2 = exact_build(&a, &y2, opts.beta)?;
            let g3 = exact_build(&a, &y3, opts.beta)?;
            let gap = (mean_abs_overlap(&g1, &g3) - mean_abs_overlap(&g2, &g3)).abs();
            let s1 = exact_sample(&g1, opts.batch, derive_seed(opts.seed, Purpose::Exact, k as u64, 1))?;
            let s2 = exact_sample(&g2, opts.batch, derive_seed(opts.seed, Purpose::Exact, k as u64, 2))?;
            let w2 = w2_empirical(&s1, &s2)?.w2();
            Ok(OverlapLipschitzCheck {
                gap,
                w2,
                pass: gap <= w2 + opts.slack,
            })
        })
        .collect()
}

/// Mean assignment cost `W_{2,n}²` between independent exact-sample batches
/// of the same law, for each batch size.
pub fn w2_consistency(g: &ExactGibbs, sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&m| {
            let costs = (0..repeats)
                .map(|r| {
                    let a = exact_sample(g, m, derive_seed(seed, Purpose::Exact, m as u64, 2 * r as u64))?;
                    let b = exact_sample(g, m, derive_seed(seed, Purpose::Exact, m as u64, 2 * r as u64 + 1))?;
                    Ok(w2_empirical(&a, &b)?.cost)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((m, mean(&costs)))
        })
        .collect()
}
