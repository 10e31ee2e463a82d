use rand::Rng;
use rayon::prelude::*;

use crate::disorder::CouplingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::linalg::psd_top_eigenvalue;
use crate::magnetization::MagnetizationVector;
use crate::rng::{Purpose, Streams};
use crate::sampler::EmpiricalSample;

/// Largest `n` accepted for enumeration (2^24 ≈ 16.8M states).
pub const MAX_EXACT_N: usize = 24;

/// Configurations sharing one high-bit prefix form a block; the low bits are
/// walked in Gray-code order from a directly evaluated starting point.
const BLOCK_BITS: usize = 14;

/// Spin `i` of bit-coded configuration `code` (bit set ⇔ `+1`).
#[inline]
pub fn spin_of(code: usize, i: usize) -> f64 {
    if code >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Exact tilted Gibbs measure `μ(x) ∝ exp((β/2)<x,Ax> + <y,x>)` on `{±1}^n`.
#[derive(Clone, Debug)]
pub struct ExactGibbs {
    n: usize,
    log_weights: Vec<f64>,
    log_z: f64,
}

impl ExactGibbs {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized log weights indexed by bit code.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn probability(&self, code: usize) -> f64 {
        (self.log_weights[code] - self.log_z).exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|&w| (w - self.log_z).exp()).collect()
    }
}

fn log_weight_direct(matrix: &CouplingMatrix, y: &[f64], beta: f64, code: usize) -> (f64, Vec<f64>) {
    let n = y.len();
    let x: Vec<f64> = (0..n).map(|i| spin_of(code, i)).collect();
    // h_i = Σ_{j≠i} A_ij x_j
    let h: Vec<f64> = (0..n)
        .map(|i| {
            let row = matrix.row(i);
            (0..n).filter(|&j| j != i).map(|j| row[j] * x[j]).sum()
        })
        .collect();
    let diag: f64 = (0..n).map(|i| matrix.get(i, i)).sum();
    let off: f64 = x.iter().zip(&h).map(|(a, b)| a * b).sum();
    let lin: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (0.5 * beta * (diag + off) + lin, h)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Enumerate all `2^n` configurations.
pub fn exact_build(matrix: &CouplingMatrix, y: &[f64], beta: f64) -> Result<ExactGibbs> {
    let n = matrix.n();
    check_dim(n, y.len())?;
    if n > MAX_EXACT_N {
        return Err(Error::invalid("n", format!("exact enumeration needs n <= {MAX_EXACT_N}, got {n}")));
    }
    if !beta.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("beta", "inputs must be finite"));
    }
    let low = n.min(BLOCK_BITS);
    let block = 1usize << low;
    let mut log_weights = vec![0.0; 1 << n];
    log_weights.par_chunks_mut(block).enumerate().for_each(|(prefix, out)| {
        let mut code = prefix << low;
        let (mut e, mut h) = log_weight_direct(matrix, y, beta, code);
        out[0] = e;
        for k in 1..block {
            let i = k.trailing_zeros() as usize;
            let xi = spin_of(code, i);
            // flipping x_i changes the energy by -2 x_i (β h_i + y_i)
            e -= 2.0 * xi * (beta * h[i] + y[i]);
            let row = matrix.row(i);
            for (j, hj) in h.iter_mut().enumerate() {
                if j != i {
                    *hj -= 2.0 * xi * row[j];
                }
            }
            code ^= 1 << i;
            out[code & (block - 1)] = e;
        }
    });
    let partial: Vec<f64> = log_weights.par_chunks(block).map(log_sum_exp).collect();
    let log_z = log_sum_exp(&partial);
    Ok(ExactGibbs { n, log_weights, log_z })
}

/// Exact mean `E_μ[x]`.
pub fn exact_mean(g: &ExactGibbs) -> MagnetizationVector {
    let n = g.n;
    let mut acc = vec![0.0; n];
    for (code, &w) in g.log_weights.iter().enumerate() {
        let p = (w - g.log_z).exp();
        for (i, a) in acc.iter_mut().enumerate() {
            *a += p * spin_of(code, i);
        }
    }
    MagnetizationVector::clamped(acc)
}

/// `E_μ[x xᵀ]`, row-major.
pub fn second_moment(g: &ExactGibbs) -> Vec<f64> {
    moment_matrix(g, &vec![0.0; g.n])
}

/// Exact covariance, assembled from centered second moments.
pub fn covariance(g: &ExactGibbs) -> Vec<f64> {
    let mean = exact_mean(g);
    moment_matrix(g, mean.values())
}

fn moment_matrix(g: &ExactGibbs, center: &[f64]) -> Vec<f64> {
    let n = g.n;
    let mut acc = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for (code, &w) in g.log_weights.iter().enumerate() {
        let p = (w - g.log_z).exp();
        for (i, di) in d.iter_mut().enumerate() {
            *di = spin_of(code, i) - center[i];
        }
        for i in 0..n {
            let pi = p * d[i];
            let row = &mut acc[i * n..=i * n + i];
            for (a, dj) in row.iter_mut().zip(&d) {
                *a += pi * dj;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            acc[j * n + i] = acc[i * n + j];
        }
    }
    acc
}

/// Largest eigenvalue of the exact covariance.
pub fn exact_cov_top_eigenvalue(g: &ExactGibbs) -> f64 {
    psd_top_eigenvalue(&covariance(g), g.n, 10_000, 1e-13)
}

/// `count` i.i.d. draws by inverse CDF over the enumerated table.
pub fn exact_sample(g: &ExactGibbs, count: usize, seed: u64) -> Result<EmpiricalSample> {
    let cdf: Vec<f64> = g
        .log_weights
        .iter()
        .scan(0.0, |s, &w| {
            *s += (w - g.log_z).exp();
            Some(*s)
        })
        .collect();
    let total = *cdf.last().expect("at least one state");
    let mut rng = Streams::new(seed).rng(Purpose::Exact, 0, 0);
    let spins = (0..count)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let code = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            (0..g.n).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect()
        })
        .collect();
    EmpiricalSample::new(g.n, spins, vec![seed], None)
}
