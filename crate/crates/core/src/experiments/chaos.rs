use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{interpolate, DisorderPath};
use crate::error::{Error, Result};
use crate::oracle::{exact_build, exact_sample, second_moment, w2_empirical};
use crate::rng::{derive_seed, Purpose};

use super::record::{bootstrap_se, bootstrap_se_with, mean, BOOTSTRAP_RESAMPLES};

/// Largest system the chaos study enumerates.
pub const MAX_CHAOS_N: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosOptions {
    pub beta: f64,
    pub n: usize,
    pub s_grid: Vec<f64>,
    pub disorder_samples: usize,
    pub seed: u64,
    /// Exact-sample batch size for the `W_{2,n}` estimates; 0 skips them.
    pub w2_batch: usize,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        Self {
            beta: 1.5,
            n: 14,
            s_grid: vec![0.0, 0.1, 0.3, 0.6],
            disorder_samples: 100,
            seed: 0,
            w2_batch: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosResult {
    pub beta: f64,
    pub n: usize,
    pub s_grid: Vec<f64>,
    /// `E[(<x⁰,x^s>/n)²]` with `x⁰ ~ μ_{A_0}`, `x^s ~ μ_{A_s}` independent.
    pub overlap_sq: Vec<f64>,
    pub overlap_se: Vec<f64>,
    /// Mean assignment `W_{2,n}` between exact-sample batches of the two laws.
    pub w2_lower: Vec<f64>,
    pub w2_se: Vec<f64>,
    /// Standard error of `overlap_sq[0] - overlap_sq[last]`, paired over draws.
    pub endpoint_gap_se: f64,
    /// Standard error of `w2_lower[last] - w2_lower[0]`, paired over draws.
    pub w2_gap_se: f64,
    /// Per-draw overlaps, `[draw][s]`.
    pub per_draw_overlap: Vec<Vec<f64>>,
}

impl ChaosResult {
    pub fn endpoint_gap(&self) -> f64 {
        self.overlap_sq[0] - self.overlap_sq[self.overlap_sq.len() - 1]
    }
}

struct Draw {
    overlap: Vec<f64>,
    w2: Vec<f64>,
}

/// Disorder-chaos study by exact enumeration.
///
/// The overlap second moment is evaluated exactly per disorder draw as
/// `(1/n²) Σ_ij E_0[x_i x_j] E_s[x_i x_j]`, so the only Monte Carlo error left
/// is over disorder.
pub fn run_chaos(opts: &ChaosOptions) -> Result<ChaosResult> {
    let n = opts.n;
    if n == 0 || n > MAX_CHAOS_N {
        return Err(Error::invalid("n", format!("chaos needs 1 <= n <= {MAX_CHAOS_N}, got {n}")));
    }
    if opts.s_grid.is_empty() || opts.s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid("s_grid", "values must lie in [0, 1]"));
    }
    if opts.disorder_samples == 0 {
        return Err(Error::invalid("disorder_samples", "must be at least 1"));
    }
    if !opts.beta.is_finite() || opts.beta < 0.0 {
        return Err(Error::invalid("beta", "must be finite and >= 0"));
    }
    let zeros = vec![0.0; n];
    let draws: Vec<Draw> = (0..opts.disorder_samples)
        .into_par_iter()
        .map(|d| -> Result<Draw> {
            let path = DisorderPath::sample(n, derive_seed(opts.seed, Purpose::Disorder, d as u64, 7))?;
            let g0 = exact_build(path.a0(), &zeros, opts.beta)?;
            let m0 = second_moment(&g0);
            let mut overlap = Vec::with_capacity(opts.s_grid.len());
            let mut w2 = Vec::with_capacity(opts.s_grid.len());
            let b0 = if opts.w2_batch > 0 {
                Some(exact_sample(&g0, opts.w2_batch, derive_seed(opts.seed, Purpose::Exact, d as u64, 0))?)
            } else {
                None
            };
            for (k, &s) in opts.s_grid.iter().enumerate() {
                let a_s = interpolate(&path, s)?;
                let gs = exact_build(&a_s, &zeros, opts.beta)?;
                let ms = second_moment(&gs);
                let dot: f64 = m0.iter().zip(&ms).map(|(a, b)| a * b).sum();
                overlap.push(dot / (n * n) as f64);
                if let Some(b0) = &b0 {
                    let seed = derive_seed(opts.seed, Purpose::Exact, d as u64, 1 + k as u64);
                    let bs = exact_sample(&gs, opts.w2_batch, seed)?;
                    w2.push(w2_empirical(b0, &bs)?.w2());
                }
            }
            Ok(Draw { overlap, w2 })
        })
        .collect::<Result<_>>()?;

    let column = |f: &dyn Fn(&Draw) -> &Vec<f64>, k: usize| -> Vec<f64> { draws.iter().map(|d| f(d)[k]).collect() };
    let ns = opts.s_grid.len();
    let mut overlap_sq = Vec::with_capacity(ns);
    let mut overlap_se = Vec::with_capacity(ns);
    let mut w2_lower = Vec::new();
    let mut w2_se = Vec::new();
    for k in 0..ns {
        let col = column(&|d| &d.overlap, k);
        overlap_sq.push(mean(&col));
        overlap_se.push(bootstrap_se(&col, opts.seed ^ k as u64));
        if opts.w2_batch > 0 {
            let col = column(&|d| &d.w2, k);
            w2_lower.push(mean(&col));
            w2_se.push(bootstrap_se(&col, opts.seed ^ (k as u64 + 1000)));
        }
    }
    let gap: Vec<f64> = draws.iter().map(|d| d.overlap[0] - d.overlap[ns - 1]).collect();
    let endpoint_gap_se = bootstrap_se_with(&gap, mean, BOOTSTRAP_RESAMPLES, opts.seed ^ 0xC0A5);
    let w2_gap_se = if opts.w2_batch > 0 {
        let gap: Vec<f64> = draws.iter().map(|d| d.w2[ns - 1] - d.w2[0]).collect();
        bootstrap_se(&gap, opts.seed ^ 0x3A2)
    } else {
        0.0
    };
    Ok(ChaosResult {
        beta: opts.beta,
        n,
        s_grid: opts.s_grid.clone(),
        overlap_sq,
        overlap_se,
        w2_lower,
        w2_se,
        endpoint_gap_se,
        w2_gap_se,
        per_draw_overlap: draws.into_iter().map(|d| d.overlap).collect(),
    })
}
