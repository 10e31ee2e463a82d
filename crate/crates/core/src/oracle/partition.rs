use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::CouplingMatrix;
use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};

use super::exact::exact_build;

/// `log Z_SK(A) = log 2^{-n} Σ_x exp((β/2)<x,Ax> - β²n/4)` by enumeration.
pub fn log_z_sk(matrix: &CouplingMatrix, beta: f64) -> Result<f64> {
    let n = matrix.n();
    if beta == 0.0 {
        return Ok(0.0);
    }
    let g = exact_build(matrix, &vec![0.0; n], beta)?;
    let nf = n as f64;
    Ok(g.log_z() - nf * std::f64::consts::LN_2 - beta * beta * nf / 4.0)
}

/// Settings of the annealed importance sampler behind [`log_z_sk_estimate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisOptions {
    /// Intermediate inverse temperatures, equally spaced in `(0, β]`.
    pub temperatures: usize,
    /// Independent annealing chains.
    pub chains: usize,
    /// Heat-bath sweeps at each intermediate temperature.
    pub sweeps_per_temperature: usize,
}

impl Default for AisOptions {
    fn default() -> Self {
        Self {
            temperatures: 800,
            chains: 32,
            sweeps_per_temperature: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogZEstimate {
    pub value: f64,
    /// Delta-method standard error from the spread of chain weights.
    pub se: f64,
    /// The exactly computed contribution of the diagonal, `(β/2) tr A - β²/4`.
    pub diagonal_part: f64,
}

/// Large-`n` estimate of `log Z_SK`.
///
/// The diagonal enters `<x,Ax>` as the constant `tr A`, so its share is exact.
/// The off-diagonal share `log E_unif exp(β Σ_{i<j} A_ij x_i x_j)` comes from
/// annealed importance sampling with heat-bath transitions; plain importance
/// sampling from uniform spins has log-weight variance of order `β²n` and is
/// useless at the sizes this is meant for.
pub fn log_z_sk_estimate(matrix: &CouplingMatrix, beta: f64, opts: AisOptions, seed: u64) -> Result<LogZEstimate> {
    if opts.temperatures == 0 || opts.chains == 0 {
        return Err(Error::invalid("temperatures", "AIS needs at least one temperature and one chain"));
    }
    let n = matrix.n();
    let nf = n as f64;
    let trace: f64 = (0..n).map(|i| matrix.get(i, i)).sum();
    let diagonal_part = 0.5 * beta * trace - beta * beta / 4.0;
    if beta == 0.0 {
        return Ok(LogZEstimate {
            value: 0.0,
            se: 0.0,
            diagonal_part: 0.0,
        });
    }
    let streams = Streams::new(seed);
    let log_w: Vec<f64> = (0..opts.chains)
        .into_par_iter()
        .map(|c| ais_chain(matrix, beta, opts, &mut streams.rng(Purpose::Annealing, c as u64, 0)))
        .collect();
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let m = w.len() as f64;
    let mean = w.iter().sum::<f64>() / m;
    let var = if w.len() > 1 {
        w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let off = max + mean.ln() - beta * beta * (nf - 1.0) / 4.0;
    Ok(LogZEstimate {
        value: diagonal_part + off,
        se: (var / m).sqrt() / mean,
        diagonal_part,
    })
}

/// One annealing chain; returns its log importance weight.
fn ais_chain(matrix: &CouplingMatrix, beta: f64, opts: AisOptions, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let n = matrix.n();
    let mut x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    // h = (A - diag A) x, kept up to date across flips
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let row = matrix.row(i);
            (0..n).filter(|&j| j != i).map(|j| row[j] * x[j]).sum()
        })
        .collect();
    let k = opts.temperatures;
    let mut log_w = 0.0;
    let mut prev = 0.0;
    for step in 1..=k {
        let b = beta * step as f64 / k as f64;
        let energy = 0.5 * x.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
        log_w += (b - prev) * energy;
        prev = b;
        for _ in 0..opts.sweeps_per_temperature {
            for i in 0..n {
                let p = 0.5 * (1.0 + (b * h[i]).tanh());
                let u: f64 = rng.random();
                let new = if u < p { 1.0 } else { -1.0 };
                if new != x[i] {
                    x[i] = new;
                    let delta = 2.0 * new;
                    let row = matrix.row(i);
                    for (hj, a) in h.iter_mut().zip(row) {
                        *hj += delta * a;
                    }
                    h[i] -= delta * row[i];
                }
            }
        }
    }
    log_w
}
