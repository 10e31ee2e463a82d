//! TAP free energy at fixed `q`, its derivatives, the entropic Bregman
//! divergence, and the natural-gradient (mirror-descent) phase of the mean
//! estimator.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::disorder::CouplingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{atanh_clamped, binary_entropy, clamp_unit, dot, norm, sup_dist, tanh_clamped};
use crate::magnetization::MagnetizationVector;
use crate::rng::{rng_from_seed, Purpose};


/// Step size used when none is given. The relative smoothness constant is at
/// most `1 + β² + β||A||_op ≈ 2.1` at `β = 0.45`, and the descent analysis asks
/// for `η ≤ 1/(2C)`; 0.2 misses that bound, 0.15 does not.
pub const DEFAULT_ETA: f64 = 0.15;
pub const DEFAULT_K_NGD: usize = 50;
/// Consecutive energy increases that count as divergence.
const DIVERGENCE_RUN: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct TapContext<'a> {
    pub matrix: &'a CouplingMatrix,
    pub y: &'a [f64],
    pub q: f64,
    pub beta: f64,
}

impl<'a> TapContext<'a> {
    pub fn new(matrix: &'a CouplingMatrix, y: &'a [f64], q: f64, beta: f64) -> Result<Self> {
        check_dim(matrix.n(), y.len())?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid("q", format!("must lie in [0, 1], got {q}")));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
        }
        Ok(Self { matrix, y, q, beta })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    fn onsager_mass(&self) -> f64 {
        self.beta * self.beta * (1.0 - self.q)
    }

    /// Energy from a precomputed `A m`.
    fn energy_with(&self, m: &[f64], am: &[f64]) -> f64 {
        let n = self.n() as f64;
        let big_q = dot(m, m) / n;
        let entropy: f64 = m.iter().map(|&v| binary_entropy(v)).sum();
        -0.5 * self.beta * dot(m, am) - dot(self.y, m) - entropy
            - n * self.beta * self.beta * (1.0 - self.q) * (1.0 + self.q - 2.0 * big_q) / 4.0
    }

    /// Gradient from `A m` and the pre-activation `u = atanh(m)`.
    fn gradient_with(&self, m: &[f64], u: &[f64], am: &[f64], out: &mut [f64]) {
        let c = self.onsager_mass();
        for i in 0..m.len() {
            out[i] = -self.beta * am[i] - self.y[i] + u[i] + c * m[i];
        }
    }
}

/// `F(m) = -(β/2)<m, A m> - <y, m> - Σ h(m_i) - n β² (1-q)(1+q-2Q(m))/4`.
pub fn tap_free_energy(ctx: &TapContext<'_>, m: &MagnetizationVector) -> Result<f64> {
    check_dim(ctx.n(), m.len())?;
    let am = ctx.matrix.apply_vec(m.values());
    Ok(ctx.energy_with(m.values(), &am))
}

/// `∇F(m) = -β A m - y + atanh(m) + β²(1-q) m`.
pub fn tap_gradient(ctx: &TapContext<'_>, m: &MagnetizationVector) -> Result<Vec<f64>> {
    check_dim(ctx.n(), m.len())?;
    let am = ctx.matrix.apply_vec(m.values());
    let u = m.fields();
    let mut g = vec![0.0; m.len()];
    ctx.gradient_with(m.values(), &u, &am, &mut g);
    Ok(g)
}

/// `(-β A + D(m) + β²(1-q) I) v` with `D(m) = diag(1/(1-m_i²))`.
pub fn tap_hessian_apply(ctx: &TapContext<'_>, m: &MagnetizationVector, v: &[f64]) -> Result<Vec<f64>> {
    check_dim(ctx.n(), m.len())?;
    check_dim(ctx.n(), v.len())?;
    let av = ctx.matrix.apply_vec(v);
    let c = ctx.onsager_mass();
    Ok(m.values()
        .iter()
        .zip(v)
        .zip(&av)
        .map(|((&mi, &vi), &avi)| -ctx.beta * avi + vi / (1.0 - mi * mi) + c * vi)
        .collect())
}

/// `<v, D(m) v>`.
pub fn mirror_metric(m: &MagnetizationVector, v: &[f64]) -> f64 {
    m.values()
        .iter()
        .zip(v)
        .map(|(&mi, &vi)| vi * vi / (1.0 - mi * mi))
        .sum()
}

/// `(1+a) ln(1+a) - a`, accurate near `a = 0`.
fn kl_kernel(a: f64) -> f64 {
    if a.abs() < 1e-3 {
        let a2 = a * a;
        a2 * (0.5 - a / 6.0 + a2 / 12.0 - a2 * a / 20.0)
    } else {
        (1.0 + a) * a.ln_1p() - a
    }
}

/// Bregman divergence of `-h`:
/// `D(m, n) = -h(m) + h(n) + <∇h(n), m - n>`.
///
/// Evaluated per coordinate as the Kullback–Leibler divergence between the
/// Bernoulli laws with means `(1+m_i)/2` and `(1+n_i)/2`, which is the same
/// quantity written as a sum of nonnegative terms.
pub fn bregman(m: &MagnetizationVector, nn: &MagnetizationVector) -> Result<f64> {
    check_dim(m.len(), nn.len())?;
    Ok(m.values()
        .iter()
        .zip(nn.values())
        .map(|(&mi, &ni)| {
            let p = 0.5 * (1.0 + mi);
            let pn = 0.5 * (1.0 + ni);
            let d = p - pn;
            pn * kl_kernel(d / pn) + (1.0 - pn) * kl_kernel(-d / (1.0 - pn))
        })
        .sum())
}

/// Per-iteration record of an NGD run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NgdTrace {
    /// `F(m^{+,k})` for `k = 0..=K`.
    pub energies: Vec<f64>,
    /// `||∇F(m^{+,k})||` for `k = 0..=K`.
    pub grad_norms: Vec<f64>,
}

impl NgdTrace {
    /// `iteration,free_energy,grad_norm` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,free_energy,grad_norm\n");
        for (k, (e, g)) in self.energies.iter().zip(&self.grad_norms).enumerate() {
            s.push_str(&format!("{k},{e:.17e},{g:.17e}\n"));
        }
        s
    }
}

/// Natural gradient descent in pre-activation coordinates:
/// `u^{k+1} = u^k - η ∇F(tanh u^k)`. Returns `tanh(u^K)`.
pub fn ngd_run(ctx: &TapContext<'_>, u0: &[f64], eta: f64, k_ngd: usize) -> Result<MagnetizationVector> {
    ngd_run_traced(ctx, u0, eta, k_ngd, false).map(|(m, _, _)| m)
}

/// `ngd_run` that also returns the final pre-activations and, when `trace`
/// is set, the energy/gradient trace.
pub fn ngd_run_traced(
    ctx: &TapContext<'_>,
    u0: &[f64],
    eta: f64,
    k_ngd: usize,
    trace: bool,
) -> Result<(MagnetizationVector, Vec<f64>, NgdTrace)> {
    let n = ctx.n();
    check_dim(n, u0.len())?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("eta", format!("must be > 0, got {eta}")));
    }
    if u0.iter().any(|u| !u.is_finite()) {
        return Err(Error::invalid("u0", "must be finite"));
    }
    let mut u = u0.to_vec();
    let mut m: Vec<f64> = u.iter().map(|&x| tanh_clamped(x)).collect();
    let mut am = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut energies = Vec::with_capacity(k_ngd + 1);
    let mut grad_norms = Vec::new();
    let mut rising = 0usize;
    for k in 0..=k_ngd {
        ctx.matrix.apply(&m, &mut am);
        let f = ctx.energy_with(&m, &am);
        if let Some(&prev) = energies.last() {
            if f > prev + 1e-10 * (1.0 + f64::abs(prev)) {
                rising += 1;
            } else {
                rising = 0;
            }
        }
        energies.push(f);
        if rising >= DIVERGENCE_RUN || !f.is_finite() {
            return Err(Error::Divergence {
                iteration: k,
                trajectory: energies,
            });
        }
        if k == k_ngd {
            if trace {
                ctx.gradient_with(&m, &u, &am, &mut grad);
                grad_norms.push(norm(&grad));
            }
            break;
        }
        ctx.gradient_with(&m, &u, &am, &mut grad);
        if trace {
            grad_norms.push(norm(&grad));
        }
        for i in 0..n {
            u[i] -= eta * grad[i];
            m[i] = tanh_clamped(u[i]);
        }
    }
    let out = MagnetizationVector::clamped(m);
    let tr = if trace {
        NgdTrace {
            energies,
            grad_norms,
        }
    } else {
        NgdTrace::default()
    };
    Ok((out, u, tr))
}

/// Distance (sup norm) between one explicit NGD step from `m` and the
/// minimizer of `<∇F(m), x - m> + (1/η) D(x, m)` found by solving its
/// first-order condition `∇F(m)_i + (atanh x_i - atanh m_i)/η = 0` coordinate
/// by coordinate with bisection.
pub fn mirror_step_check(ctx: &TapContext<'_>, m: &MagnetizationVector, eta: f64) -> Result<f64> {
    check_dim(ctx.n(), m.len())?;
    if !(eta >= 0.0) {
        return Err(Error::invalid("eta", "must be >= 0"));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let u0 = m.fields();
    let (_, u1, _) = ngd_run_traced(ctx, &u0, eta, 1, false)?;
    let explicit: Vec<f64> = u1.iter().map(|&x| tanh_clamped(x)).collect();

    let grad = tap_gradient(ctx, m)?;
    let inv_eta = 1.0 / eta;
    let foc: Vec<f64> = m
        .values()
        .iter()
        .zip(&grad)
        .map(|(&mi, &gi)| {
            let am = atanh_clamped(mi);
            let phi = |x: f64| gi + inv_eta * (x.atanh() - am);
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if phi(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            clamp_unit(0.5 * (lo + hi))
        })
        .collect();
    Ok(sup_dist(&explicit, &foc))
}

/// Smallest and largest ratio `<v, H v> / <v, D(m) v>` over `probes` Gaussian
/// directions.
pub fn convexity_probe(
    ctx: &TapContext<'_>,
    m: &MagnetizationVector,
    probes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(seed, Purpose::Experiment);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..probes {
        let v: Vec<f64> = (0..ctx.n()).map(|_| rng.sample(StandardNormal)).collect();
        let hv = tap_hessian_apply(ctx, m, &v)?;
        let r = dot(&v, &hv) / mirror_metric(m, &v);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_goe;
    use std::f64::consts::LN_2;

    fn mvec(v: Vec<f64>) -> MagnetizationVector {
        MagnetizationVector::new(v).unwrap()
    }

    #[test]
    fn energy_at_origin() {
        let a = sample_goe(7, 3).unwrap();
        let y: Vec<f64> = (0..7).map(|i| i as f64 * 0.3 - 1.0).collect();
        let (beta, q) = (0.4, 0.25);
        let ctx = TapContext::new(&a, &y, q, beta).unwrap();
        let f = tap_free_energy(&ctx, &MagnetizationVector::zeros(7)).unwrap();
        let expect = -7.0 * LN_2 - 7.0 * beta * beta * (1.0 - q * q) / 4.0;
        assert!((f - expect).abs() < 1e-12);
        let g = tap_gradient(&ctx, &MagnetizationVector::zeros(7)).unwrap();
        for (gi, yi) in g.iter().zip(&y) {
            assert_eq!(*gi, -yi);
        }
    }

    #[test]
    fn energy_without_coupling() {
        let a = sample_goe(5, 3).unwrap();
        let y = vec![0.3, -0.2, 1.0, 0.0, 0.5];
        let m = mvec(vec![0.1, -0.5, 0.9, 0.0, -0.2]);
        let ctx = TapContext::new(&a, &y, 0.0, 0.0).unwrap();
        let expect: f64 = -dot(&y, m.values()) - m.values().iter().map(|&v| binary_entropy(v)).sum::<f64>();
        assert!((tap_free_energy(&ctx, &m).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn context_validation() {
        let a = sample_goe(3, 1).unwrap();
        assert!(TapContext::new(&a, &[0.0; 3], 1.5, 0.3).is_err());
        assert!(TapContext::new(&a, &[0.0; 2], 0.5, 0.3).is_err());
        assert!(TapContext::new(&a, &[0.0; 3], 0.5, -0.3).is_err());
    }

    #[test]
    fn hessian_identity_case() {
        let a = sample_goe(4, 1).unwrap();
        let y = vec![0.0; 4];
        let ctx = TapContext::new(&a, &y, 0.3, 0.0).unwrap();
        let v = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(tap_hessian_apply(&ctx, &MagnetizationVector::zeros(4), &v).unwrap(), v);
    }

    #[test]
    fn bregman_zero_on_diagonal_and_positive_off() {
        let m = mvec(vec![0.3, -0.99, 0.0]);
        assert_eq!(bregman(&m, &m).unwrap(), 0.0);
        let n = mvec(vec![0.3, -0.99, 1e-9]);
        assert!(bregman(&m, &n).unwrap() > 0.0);
        // Direct formula agrees away from cancellation.
        let a = mvec(vec![0.5, -0.2]);
        let b = mvec(vec![-0.1, 0.7]);
        let direct: f64 = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &z)| -binary_entropy(x) + binary_entropy(z) - z.atanh() * (x - z))
            .sum();
        assert!((bregman(&a, &b).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn ngd_trivial_cases() {
        let a = sample_goe(6, 2).unwrap();
        let y: Vec<f64> = (0..6).map(|i| 0.2 * i as f64 - 0.5).collect();
        let ctx = TapContext::new(&a, &y, 0.2, 0.3).unwrap();
        let u0 = vec![0.1, -0.3, 0.0, 0.7, 1.0, -2.0];
        let m = ngd_run(&ctx, &u0, 0.15, 0).unwrap();
        let expect: Vec<f64> = u0.iter().map(|u| u.tanh()).collect();
        assert_eq!(m.values(), &expect[..]);
        // beta = 0: u0 = y is stationary.
        let ctx0 = TapContext::new(&a, &y, 0.2, 0.0).unwrap();
        let m = ngd_run(&ctx0, &y, 0.15, 40).unwrap();
        let expect: Vec<f64> = y.iter().map(|u| u.tanh()).collect();
        assert_eq!(m.values(), &expect[..]);
        assert!(ngd_run(&ctx, &u0, 0.0, 3).is_err());
        assert!(ngd_run(&ctx, &[f64::NAN; 6], 0.1, 3).is_err());
    }

    #[test]
    fn ngd_divergence_is_reported() {
        // Pure entropy term: u <- (1 - eta) u, so eta = 3 doubles |u| with
        // alternating sign and the energy climbs every step.
        let a = CouplingMatrix::zeros(1).unwrap();
        let y = vec![0.0];
        let ctx = TapContext::new(&a, &y, 0.0, 0.0).unwrap();
        let res = ngd_run(&ctx, &[0.1], 3.0, 200);
        match res {
            Err(Error::Divergence { trajectory, .. }) => assert!(trajectory.len() >= 4),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn mirror_check_trivial_cases() {
        let a = sample_goe(5, 8).unwrap();
        let y = vec![0.1, 0.2, -0.3, 0.0, 0.4];
        let ctx = TapContext::new(&a, &y, 0.5, 0.3).unwrap();
        let m = mvec(vec![0.1, 0.5, -0.2, 0.0, 0.3]);
        assert_eq!(mirror_step_check(&ctx, &m, 0.0).unwrap(), 0.0);
        let ctx0 = TapContext::new(&a, &y, 0.5, 0.0).unwrap();
        let stationary = MagnetizationVector::from_fields(&y);
        assert!(mirror_step_check(&ctx0, &stationary, 0.1).unwrap() < 1e-15);
    }
}
