//! Dense kernels on row-major `f64` storage.
//!
//! Reductions run in a fixed order (four interleaved accumulators, then a
//! fixed combine) so results are bitwise reproducible.

/// Boundary clamp for magnetizations: values live in `[-1 + EPS, 1 - EPS]`.
pub const CLAMP_EPS: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `out = M v` for an `n x n` row-major `M`.
pub fn matvec(m: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), n * n);
    for (row, o) in m.chunks_exact(n).zip(out.iter_mut()) {
        *o = dot(row, v);
    }
}

pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS)
}

/// `tanh` clamped away from ±1.
#[inline]
pub fn tanh_clamped(x: f64) -> f64 {
    clamp_unit(x.tanh())
}

/// `atanh` of a clamped argument.
#[inline]
pub fn atanh_clamped(m: f64) -> f64 {
    clamp_unit(m).atanh()
}

/// Binary entropy `h(m) = -((1+m)/2) log((1+m)/2) - ((1-m)/2) log((1-m)/2)`
/// in natural units, evaluated with `ln_1p` near the boundary.
pub fn binary_entropy(m: f64) -> f64 {
    let m = clamp_unit(m);
    let p = 0.5 * (1.0 + m);
    let q = 0.5 * (1.0 - m);
    // log p = log((1+m)/2) = ln_1p(m) - ln 2, same for q.
    let lp = m.ln_1p() - std::f64::consts::LN_2;
    let lq = (-m).ln_1p() - std::f64::consts::LN_2;
    -(p * lp) - q * lq
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Returns the Rayleigh quotient at the final iterate.
pub fn psd_top_eigenvalue(m: &[f64], n: usize, max_iter: usize, tol: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for it in 0..max_iter {
        matvec(m, n, &v, &mut w);
        let next = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        if it > 0 && (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn entropy_endpoints() {
        assert!((binary_entropy(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(binary_entropy(1.0) >= 0.0);
        assert!(binary_entropy(1.0) < 1e-10);
        assert!((binary_entropy(0.3) - binary_entropy(-0.3)).abs() < 1e-15);
    }

    #[test]
    fn psd_power_iteration_on_diagonal() {
        let m = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5];
        assert!((psd_top_eigenvalue(&m, 3, 1000, 1e-14) - 3.0).abs() < 1e-10);
    }
}
