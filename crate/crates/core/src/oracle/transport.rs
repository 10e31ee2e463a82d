use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::rng::{Purpose, Streams};
use crate::sampler::EmpiricalSample;

/// Largest batch size accepted by the assignment solver.
pub const MAX_ASSIGNMENT_SIZE: usize = 3000;

/// Optimal matching between two equal-size batches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `assignment[i]` is the index in the second batch matched to item `i`.
    pub assignment: Vec<usize>,
    /// `(1/(n·m)) Σ_i ‖a_i - b_{σ(i)}‖²`, the squared normalized distance.
    pub cost: f64,
}

impl TransportPlan {
    /// `W_{2,n}` itself.
    pub fn w2(&self) -> f64 {
        self.cost.sqrt()
    }
}

/// Minimum-cost perfect matching for a dense `m × m` cost matrix (row-major)
/// by shortest augmenting paths with dual potentials. Returns the column
/// assigned to each row.
pub fn assignment(cost: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(cost.len(), m * m, "cost matrix must be m x m");
    if m == 0 {
        return Vec::new();
    }
    // 1-based bookkeeping; column 0 is a virtual root
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * m..i0 * m];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; m];
    for j in 1..=m {
        out[p[j] - 1] = j - 1;
    }
    out
}

fn check_batches(m_a: usize, m_b: usize, n_a: usize, n_b: usize) -> Result<()> {
    if m_a != m_b {
        return Err(Error::invalid("batch", format!("sizes differ: {m_a} vs {m_b}")));
    }
    if m_a == 0 {
        return Err(Error::invalid("batch", "must not be empty"));
    }
    if m_a > MAX_ASSIGNMENT_SIZE {
        return Err(Error::invalid("batch", format!("size {m_a} exceeds {MAX_ASSIGNMENT_SIZE}")));
    }
    if n_a != n_b {
        return Err(Error::DimensionMismatch {
            expected: n_a,
            got: n_b,
        });
    }
    Ok(())
}

/// Assignment-based `W_{2,n}²` between two spin batches.
///
/// On `{±1}^n` the squared Euclidean cost is `4 × Hamming`, a metric, so some
/// optimal plan leaves the mass shared by both batches in place. Identical
/// configurations are therefore paired first and only the remainder goes to
/// the assignment solver.
pub fn w2_empirical(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<TransportPlan> {
    let m = a.spins.len();
    check_batches(m, b.spins.len(), a.n, b.n)?;
    let n = a.n;
    let mut pool: HashMap<&[i8], Vec<usize>> = HashMap::new();
    for (j, x) in b.spins.iter().enumerate().rev() {
        pool.entry(x.as_slice()).or_default().push(j);
    }
    let mut assignment = vec![usize::MAX; m];
    let mut rest_a = Vec::new();
    for (i, x) in a.spins.iter().enumerate() {
        match pool.get_mut(x.as_slice()).and_then(|v| v.pop()) {
            Some(j) => assignment[i] = j,
            None => rest_a.push(i),
        }
    }
    let mut rest_b: Vec<usize> = pool.into_values().flatten().collect();
    rest_b.sort_unstable();
    let r = rest_a.len();
    let mut cost = vec![0.0; r * r];
    for (ri, &i) in rest_a.iter().enumerate() {
        for (rj, &j) in rest_b.iter().enumerate() {
            let diff = a.spins[i].iter().zip(&b.spins[j]).filter(|(x, y)| x != y).count();
            cost[ri * r + rj] = 4.0 * diff as f64;
        }
    }
    let sub = assignment_sub(&cost, r);
    let mut total = 0.0;
    for (ri, &rj) in sub.iter().enumerate() {
        assignment[rest_a[ri]] = rest_b[rj];
        total += cost[ri * r + rj];
    }
    Ok(TransportPlan {
        assignment,
        cost: total / (n as f64 * m as f64),
    })
}

fn assignment_sub(cost: &[f64], r: usize) -> Vec<usize> {
    if r == 0 {
        Vec::new()
    } else {
        assignment(cost, r)
    }
}

/// Assignment-based `W_{2,n}²` between two batches of real vectors.
pub fn w2_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<TransportPlan> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    check_batches(m, b.len(), n, b.first().map_or(0, Vec::len))?;
    if a.iter().chain(b).any(|x| x.len() != n) {
        return Err(Error::invalid("batch", "vectors of unequal length"));
    }
    let mut cost = vec![0.0; m * m];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cost[i * m + j] = dist_sq(x, y);
        }
    }
    let assignment = assignment(&cost, m);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
    Ok(TransportPlan {
        assignment,
        cost: total / (n as f64 * m as f64),
    })
}

/// Upper `level` quantile of `W_{2,n}²` between random equal halves of the
/// pooled batches: the spread to expect if both came from one law.
pub fn permutation_threshold(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<f64> {
    check_batches(a.spins.len(), b.spins.len(), a.n, b.n)?;
    if resamples == 0 || !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid("resamples", "need resamples >= 1 and level in [0,1]"));
    }
    let m = a.spins.len();
    let mut pooled: Vec<Vec<i8>> = a.spins.iter().chain(&b.spins).cloned().collect();
    let mut rng = Streams::new(seed).rng(Purpose::Bootstrap, 0, 0);
    let mut costs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        pooled.shuffle(&mut rng);
        let left = EmpiricalSample::new(a.n, pooled[..m].to_vec(), vec![], None)?;
        let right = EmpiricalSample::new(a.n, pooled[m..].to_vec(), vec![], None)?;
        costs.push(w2_empirical(&left, &right)?.cost);
    }
    costs.sort_by(f64::total_cmp);
    let idx = ((level * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    Ok(costs[idx])
}
