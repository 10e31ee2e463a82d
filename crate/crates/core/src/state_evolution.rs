//! Scalar state evolution: `mmse(γ)`, the recursion `γ_{k+1} = β²(1 - mmse(γ_k + t))`,
//! its fixed point `γ_*(β, t)` and the schedule `q_*(β, ℓδ) = γ_*/β²` consumed by
//! the sampler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_QUADRATURE_ORDER: usize = 61;
pub const DEFAULT_TOL: f64 = 1e-10;
const PICARD_DAMPING: f64 = 0.5;
const PICARD_CAP: usize = 20_000;

/// Gauss–Hermite rule rescaled to integrate against the standard normal density.
#[derive(Clone, Debug)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    /// Rule of the given order (number of nodes). Nodes come from Newton's
    /// method on the orthonormal Hermite recurrence.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quadrature_order", "must be at least 1"));
        }
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}
        let n = order;
        let nf = n as f64;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        Ok(Self {
            nodes: x.into_iter().map(|v| v * sqrt2).collect(),
            weights: w.into_iter().map(|v| v * inv_sqrt_pi).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(W)` for `W ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_QUADRATURE_ORDER).expect("positive order")
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// `mmse(γ) = 1 - E tanh(γ + sqrt(γ) W)²`, clamped to `[0, 1]`.
pub fn mmse(gamma: f64, quad: &Quadrature) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma", format!("must be >= 0, got {gamma}")));
    }
    Ok(mmse_unchecked(gamma, quad))
}

fn mmse_unchecked(gamma: f64, quad: &Quadrature) -> f64 {
    let s = gamma.sqrt();
    let e = quad.expect(|w| {
        let v = (gamma + s * w).tanh();
        v * v
    });
    (1.0 - e).clamp(0.0, 1.0)
}

fn se_map(beta: f64, t: f64, gamma: f64, quad: &Quadrature) -> f64 {
    beta * beta * (1.0 - mmse_unchecked(gamma + t, quad))
}

/// `γ_0 = 0, ..., γ_{k_max}`.
pub fn gamma_iterates(beta: f64, t: f64, k_max: usize, quad: &Quadrature) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("must be >= 0, got {t}")));
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut g = 0.0;
    out.push(g);
    for _ in 0..k_max {
        g = se_map(beta, t, g, quad);
        out.push(g);
    }
    Ok(out)
}

/// Unique fixed point of `γ = β²(1 - mmse(γ + t))` for `t > 0`, `β < 1`.
///
/// Damped Picard iteration (the map has slope in `[0, β²]`), stopped once the
/// residual drops below `tol·(1-β²)` so the error is at most `tol`; bisection
/// on `[0, β²]` takes over if Picard hits its cap.
pub fn gamma_star(beta: f64, t: f64, tol: f64, quad: &Quadrature) -> Result<f64> {
    check_beta(beta)?;
    if beta >= 1.0 {
        return Err(Error::invalid("beta", format!("fixed point requires beta < 1, got {beta}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("must be > 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let target = tol * (1.0 - beta * beta);
    let mut g = 0.0;
    for _ in 0..PICARD_CAP {
        let f = se_map(beta, t, g, quad);
        if (f - g).abs() <= target {
            return Ok(f);
        }
        g = (1.0 - PICARD_DAMPING) * g + PICARD_DAMPING * f;
    }
    let (mut lo, mut hi) = (0.0, beta * beta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - se_map(beta, t, mid, quad) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= target {
            return Ok(0.5 * (lo + hi));
        }
    }
    let mid = 0.5 * (lo + hi);
    Err(Error::FixedPointStalled {
        beta,
        t,
        residual: (mid - se_map(beta, t, mid, quad)).abs(),
    })
}

/// Predicted per-coordinate MSE of AMP after `k` iterations in the planted
/// model, `1 - γ_{k+1}(β, t)/β²`.
pub fn amp_mse_prediction(beta: f64, t: f64, k: usize, quad: &Quadrature) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be > 0"));
    }
    let g = gamma_iterates(beta, t, k + 1, quad)?;
    Ok(1.0 - g[k + 1] / (beta * beta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub t: f64,
    pub gamma_star: f64,
    pub q_star: f64,
}

/// Precomputed `(t_ℓ, γ_*(β, t_ℓ), q_*(β, t_ℓ))` for `ℓ = 0..=L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTable {
    pub beta: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub big_l: usize,
    pub quadrature_order: usize,
    pub entries: Vec<ScheduleEntry>,
}

impl ScheduleTable {
    pub fn q_star(&self, step: usize) -> f64 {
        self.entries[step].q_star
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Build the schedule. The `ℓ = 0` entry is the `t ↓ 0` limit, 0.
pub fn build_schedule(beta: f64, delta: f64, big_l: usize, quad: &Quadrature) -> Result<ScheduleTable> {
    build_schedule_with_tol(beta, delta, big_l, quad, DEFAULT_TOL)
}

pub fn build_schedule_with_tol(
    beta: f64,
    delta: f64,
    big_l: usize,
    quad: &Quadrature,
    tol: f64,
) -> Result<ScheduleTable> {
    check_beta(beta)?;
    if beta >= 1.0 {
        return Err(Error::invalid("beta", format!("schedule requires beta < 1, got {beta}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid("delta", format!("must be > 0, got {delta}")));
    }
    if big_l < 1 {
        return Err(Error::invalid("L", "must be at least 1"));
    }
    let mut entries = Vec::with_capacity(big_l + 1);
    entries.push(ScheduleEntry {
        t: 0.0,
        gamma_star: 0.0,
        q_star: 0.0,
    });
    for l in 1..=big_l {
        let t = l as f64 * delta;
        let g = gamma_star(beta, t, tol, quad)?;
        let q = if beta > 0.0 { g / (beta * beta) } else { 0.0 };
        entries.push(ScheduleEntry {
            t,
            gamma_star: g,
            q_star: q,
        });
    }
    Ok(ScheduleTable {
        beta,
        delta,
        big_l,
        quadrature_order: quad.order(),
        entries,
    })
}
