use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::disorder::{sample_goe, CouplingMatrix};
use crate::error::{Error, Result};
use crate::oracle::{exact_build, exact_sample, w2_empirical, MAX_ASSIGNMENT_SIZE};
use crate::rng::{derive_seed, Purpose, Streams};
use crate::sampler::{run_replicas, EmpiricalSample, RunConfig, RunPlan};

use super::record::{bootstrap_se, mean, Curve, RunRecord};

/// Largest `n` the quality study enumerates.
pub const MAX_QUALITY_N: usize = 14;
/// Default assignment batch size.
pub const DEFAULT_W2_BATCH: usize = 2000;

/// Per-batch `W_{2,n}` between sampler output and exact Gibbs draws.
///
/// All three comparisons in a batch share the same exact-sample batch, so the
/// differences between them are paired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonComparison {
    /// Localization steps compared; horizon `T = step · δ`.
    pub steps: Vec<usize>,
    pub horizons: Vec<f64>,
    pub batch: usize,
    /// `[horizon][batch]`.
    pub algorithm: Vec<Vec<f64>>,
    /// Independent uniform spins against the exact batch.
    pub uniform: Vec<f64>,
    /// A second exact batch against the first: the finite-sample floor.
    pub exact_baseline: Vec<f64>,
}

/// Mean and bootstrap standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(values: &[f64], seed: u64) -> Self {
        Self {
            mean: mean(values),
            se: bootstrap_se(values, seed),
        }
    }
}

impl HorizonComparison {
    pub fn algorithm_at(&self, h: usize) -> Estimate {
        Estimate::of(&self.algorithm[h], 11 + h as u64)
    }

    pub fn uniform_estimate(&self) -> Estimate {
        Estimate::of(&self.uniform, 7)
    }

    pub fn baseline_estimate(&self) -> Estimate {
        Estimate::of(&self.exact_baseline, 9)
    }

    /// Paired `uniform − algorithm` gap at horizon index `h`.
    pub fn advantage_over_uniform(&self, h: usize) -> Estimate {
        let d: Vec<f64> = self.uniform.iter().zip(&self.algorithm[h]).map(|(u, a)| u - a).collect();
        Estimate::of(&d, 13 + h as u64)
    }

    /// Paired `algorithm[h] − algorithm[h+1]` gap.
    pub fn improvement(&self, h: usize) -> Estimate {
        let d: Vec<f64> = self.algorithm[h]
            .iter()
            .zip(&self.algorithm[h + 1])
            .map(|(a, b)| a - b)
            .collect();
        Estimate::of(&d, 17 + h as u64)
    }

    pub fn decreasing_in_horizon(&self) -> bool {
        let means: Vec<f64> = self.algorithm.iter().map(|v| mean(v)).collect();
        means.windows(2).all(|w| w[1] < w[0])
    }
}

fn split(sample: &EmpiricalSample, batch: usize) -> Vec<EmpiricalSample> {
    sample
        .spins
        .chunks_exact(batch)
        .map(|c| EmpiricalSample::new(sample.n, c.to_vec(), vec![], None).expect("rows already validated"))
        .collect()
}

fn uniform_sample(n: usize, count: usize, seed: u64) -> Result<EmpiricalSample> {
    let mut rng = Streams::new(seed).rng(Purpose::Experiment, 0, 0);
    let spins = (0..count)
        .map(|_| (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        .collect();
    EmpiricalSample::new(n, spins, vec![seed], None)
}

/// Run `replicas` sampler trajectories on `matrix` and compare their outputs
/// at each step in `steps` with exact Gibbs draws, batch by batch.
pub fn compare_to_exact(
    matrix: &CouplingMatrix,
    plan: &RunPlan,
    replicas: usize,
    steps: &[usize],
    batch: usize,
    seed: u64,
) -> Result<HorizonComparison> {
    if batch == 0 || batch > MAX_ASSIGNMENT_SIZE || replicas < batch {
        return Err(Error::invalid("batch", format!("need 1 <= batch <= min(replicas, {MAX_ASSIGNMENT_SIZE})")));
    }
    let n = matrix.n();
    let batches = replicas / batch;
    let used = batches * batch;
    let g = exact_build(matrix, &vec![0.0; n], plan.config().beta)?;
    let exact = split(&exact_sample(&g, used, derive_seed(seed, Purpose::Exact, 0, 0))?, batch);
    let second = split(&exact_sample(&g, used, derive_seed(seed, Purpose::Exact, 1, 0))?, batch);
    let uniform = split(&uniform_sample(n, used, derive_seed(seed, Purpose::Experiment, 0, 0))?, batch);

    let outcomes = run_replicas(matrix, plan, used, steps)?;
    let mut algorithm = Vec::with_capacity(steps.len());
    for h in 0..steps.len() {
        let spins: Vec<Vec<i8>> = outcomes.iter().map(|o| o.spins[h].clone()).collect();
        let alg = split(&EmpiricalSample::new(n, spins, vec![], None)?, batch);
        algorithm.push(
            alg.iter()
                .zip(&exact)
                .map(|(a, e)| w2_empirical(a, e).map(|p| p.w2()))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let w2s = |xs: &[EmpiricalSample]| -> Result<Vec<f64>> {
        xs.iter().zip(&exact).map(|(a, e)| w2_empirical(a, e).map(|p| p.w2())).collect()
    };
    Ok(HorizonComparison {
        steps: steps.to_vec(),
        horizons: steps.iter().map(|&s| s as f64 * plan.config().delta).collect(),
        batch,
        algorithm,
        uniform: w2s(&uniform)?,
        exact_baseline: w2s(&second)?,
    })
}

/// Sampling quality across inverse temperatures: one GOE instance per `β`,
/// algorithm vs exact Gibbs, uniform control and exact-vs-exact floor.
pub fn run_sampling_quality(
    beta_grid: &[f64],
    n: usize,
    replicas: usize,
    config_base: &RunConfig,
    seed: u64,
) -> Result<RunRecord> {
    if n == 0 || n > MAX_QUALITY_N {
        return Err(Error::invalid("n", format!("quality needs 1 <= n <= {MAX_QUALITY_N}, got {n}")));
    }
    if replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    let batches = replicas.div_ceil(DEFAULT_W2_BATCH);
    let batch = replicas / batches;
    let mut record = RunRecord::new(
        "quality",
        json!({ "beta_grid": beta_grid, "n": n, "replicas": replicas, "base": config_base, "seed": seed }),
    );
    let mut alg_curve = Curve::default();
    let mut unif_curve = Curve::default();
    let mut base_curve = Curve::default();
    for (k, &beta) in beta_grid.iter().enumerate() {
        let cfg = RunConfig {
            beta,
            n,
            seed: derive_seed(seed, Purpose::Experiment, k as u64, 1),
            ..config_base.clone()
        };
        record.out_of_theory |= cfg.out_of_theory();
        record.seeds.push(cfg.seed);
        let plan = RunPlan::new(cfg.clone())?;
        let matrix = sample_goe(n, derive_seed(seed, Purpose::Disorder, k as u64, 1))?;
        let cmp = compare_to_exact(&matrix, &plan, replicas, &[cfg.big_l], batch, cfg.seed)?;
        let (a, u, b) = (cmp.algorithm_at(0), cmp.uniform_estimate(), cmp.baseline_estimate());
        alg_curve.push(beta, a.mean, a.se);
        unif_curve.push(beta, u.mean, u.se);
        base_curve.push(beta, b.mean, b.se);
        let adv = cmp.advantage_over_uniform(0);
        record.metric(format!("beta={beta}.w2_algorithm"), a.mean);
        record.metric(format!("beta={beta}.w2_uniform"), u.mean);
        record.metric(format!("beta={beta}.w2_exact_baseline"), b.mean);
        record.metric(format!("beta={beta}.advantage_over_uniform"), adv.mean);
        record.metric(format!("beta={beta}.advantage_se"), adv.se);
    }
    record.curves.insert("algorithm".into(), alg_curve);
    record.curves.insert("uniform".into(), unif_curve);
    record.curves.insert("exact_baseline".into(), base_curve);
    Ok(record.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_quality_run_is_reproducible() {
        let base = RunConfig {
            delta: 0.1,
            big_l: 10,
            k_amp: 5,
            k_ngd: 5,
            ..RunConfig::default()
        };
        let r = run_sampling_quality(&[0.0, 0.6], 4, 60, &base, 3).unwrap();
        assert!(r.out_of_theory);
        assert_eq!(r.curves["algorithm"].x, vec![0.0, 0.6]);
        let again = run_sampling_quality(&[0.0, 0.6], 4, 60, &base, 3).unwrap();
        assert_eq!(again.metrics, r.metrics);
        assert!(run_sampling_quality(&[0.3], 15, 10, &base, 3).is_err());
    }
}
