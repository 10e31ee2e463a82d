use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::disorder::CouplingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::rng::{Purpose, Streams};
use crate::sampler::EmpiricalSample;

/// Conditional probability that `x_i = +1` given the other spins, under
/// `μ(x) ∝ exp((β/2)<x,Ax> + <y,x>)`.
pub fn heat_bath_probability(matrix: &CouplingMatrix, y: Option<&[f64]>, beta: f64, x: &[f64], i: usize) -> f64 {
    let h = dot(matrix.row(i), x) - matrix.get(i, i) * x[i];
    let a = beta * h + y.map_or(0.0, |y| y[i]);
    0.5 * (1.0 + a.tanh())
}

/// One systematic-scan heat-bath sweep over all sites.
pub fn heat_bath_sweep(matrix: &CouplingMatrix, y: Option<&[f64]>, beta: f64, x: &mut [f64], rng: &mut ChaCha8Rng) {
    for i in 0..x.len() {
        let p = heat_bath_probability(matrix, y, beta, x, i);
        let u: f64 = rng.random();
        x[i] = if u < p { 1.0 } else { -1.0 };
    }
}

/// Final states of `chains` independent heat-bath chains started from uniform
/// spins, each run for `sweeps` sweeps.
pub fn glauber_run(
    matrix: &CouplingMatrix,
    beta: f64,
    sweeps: usize,
    chains: usize,
    seed: u64,
) -> Result<EmpiricalSample> {
    glauber_run_tilted(matrix, None, beta, sweeps, chains, seed)
}

pub fn glauber_run_tilted(
    matrix: &CouplingMatrix,
    y: Option<&[f64]>,
    beta: f64,
    sweeps: usize,
    chains: usize,
    seed: u64,
) -> Result<EmpiricalSample> {
    let n = matrix.n();
    if let Some(y) = y {
        check_dim(n, y.len())?;
    }
    if sweeps == 0 {
        return Err(Error::invalid("sweeps", "must be at least 1"));
    }
    if chains == 0 {
        return Err(Error::invalid("chains", "must be at least 1"));
    }
    let streams = Streams::new(seed);
    let spins = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = streams.rng(Purpose::Glauber, c as u64, 0);
            let mut x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            for _ in 0..sweeps {
                heat_bath_sweep(matrix, y, beta, &mut x, &mut rng);
            }
            x.iter().map(|&v| if v > 0.0 { 1i8 } else { -1 }).collect()
        })
        .collect();
    EmpiricalSample::new(n, spins, vec![seed], None)
}
