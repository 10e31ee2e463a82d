//! AMP phase of the mean estimator.
//!
//! ```text
//! m^{-1} = z^0 = 0
//! m^k    = tanh(z^k),   b_k = (β²/n) Σ_i (1 - tanh²(z^k_i))
//! z^{k+1} = β A m^k + y - b_k m^{k-1}
//! ```

use crate::disorder::CouplingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, norm};
use crate::magnetization::MagnetizationVector;

/// Default number of AMP iterations.
pub const DEFAULT_K_AMP: usize = 25;

/// Operator-norm ceiling under which the Lipschitz bound `k 6^k` is claimed.
pub const LIPSCHITZ_OP_NORM_GATE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct AmpState {
    /// Pre-activations `z^k`.
    pub z: Vec<f64>,
    /// `m^k = tanh(z^k)`.
    pub m_curr: MagnetizationVector,
    /// `m^{k-1}`.
    pub m_prev: MagnetizationVector,
    /// Onsager coefficient `b_k`.
    pub onsager: f64,
    pub iter: usize,
}

fn onsager(beta: f64, m: &MagnetizationVector) -> f64 {
    let n = m.len() as f64;
    beta * beta * m.values().iter().map(|v| 1.0 - v * v).sum::<f64>() / n
}

impl AmpState {
    /// `z^0 = 0`, `m^{-1} = 0`.
    pub fn initial(n: usize, beta: f64) -> Self {
        let m = MagnetizationVector::zeros(n);
        Self {
            z: vec![0.0; n],
            onsager: onsager(beta, &m),
            m_prev: MagnetizationVector::zeros(n),
            m_curr: m,
            iter: 0,
        }
    }

    /// Build a state at arbitrary pre-activations (used by tests and probes).
    pub fn at(z: Vec<f64>, m_prev: MagnetizationVector, beta: f64, iter: usize) -> Result<Self> {
        check_dim(z.len(), m_prev.len())?;
        let m_curr = MagnetizationVector::from_fields(&z);
        Ok(Self {
            onsager: onsager(beta, &m_curr),
            z,
            m_curr,
            m_prev,
            iter,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }
}

/// One AMP update.
pub fn amp_step(state: &AmpState, matrix: &CouplingMatrix, y: &[f64], beta: f64) -> Result<AmpState> {
    let n = matrix.n();
    check_dim(n, y.len())?;
    check_dim(n, state.n())?;
    let mut next = AmpState {
        z: vec![0.0; n],
        m_curr: state.m_curr.clone(),
        m_prev: state.m_prev.clone(),
        onsager: 0.0,
        iter: state.iter + 1,
    };
    advance(&mut next, matrix, y, beta, state.onsager);
    Ok(next)
}

/// In-place variant of `amp_step`. `state.m_curr`, `state.m_prev` hold `m^k,
/// m^{k-1}`; `b` is `b_k`.
fn advance(state: &mut AmpState, matrix: &CouplingMatrix, y: &[f64], beta: f64, b: f64) {
    matrix.apply(state.m_curr.values(), &mut state.z);
    for ((z, &yi), &mp) in state.z.iter_mut().zip(y).zip(state.m_prev.values()) {
        *z = beta * *z + yi - b * mp;
    }
    let new_m = MagnetizationVector::from_fields(&state.z);
    state.m_prev = std::mem::replace(&mut state.m_curr, new_m);
    state.onsager = onsager(beta, &state.m_curr);
}

/// Run `k_amp` iterations from the zero initialization and return `m^{k_amp}`
/// with the final state.
pub fn amp_run(
    matrix: &CouplingMatrix,
    y: &[f64],
    beta: f64,
    k_amp: usize,
) -> Result<(MagnetizationVector, AmpState)> {
    amp_run_observed(matrix, y, beta, k_amp, |_| {})
}

/// `amp_run` with a callback after every iterate (including the initial one).
pub fn amp_run_observed(
    matrix: &CouplingMatrix,
    y: &[f64],
    beta: f64,
    k_amp: usize,
    mut observe: impl FnMut(&AmpState),
) -> Result<(MagnetizationVector, AmpState)> {
    let n = matrix.n();
    check_dim(n, y.len())?;
    let mut state = AmpState::initial(n, beta);
    observe(&state);
    for _ in 0..k_amp {
        let b = state.onsager;
        advance(&mut state, matrix, y, beta, b);
        state.iter += 1;
        observe(&state);
    }
    Ok((state.m_curr.clone(), state))
}

/// `||atanh AMP(A, y1; k) - atanh AMP(A, y2; k)|| / ||y1 - y2||`, with the
/// inverse map evaluated as the pre-activation `z^k` (equal to `atanh(m^k)`
/// away from the clamp).
pub fn amp_lipschitz_probe(
    matrix: &CouplingMatrix,
    y1: &[f64],
    y2: &[f64],
    beta: f64,
    k: usize,
) -> Result<f64> {
    let gap = dist_sq(y1, y2).sqrt();
    if gap == 0.0 {
        return Err(Error::invalid("y2", "must differ from y1"));
    }
    let op = matrix.op_norm_estimate();
    if op > LIPSCHITZ_OP_NORM_GATE {
        return Err(Error::invalid(
            "matrix",
            format!("operator norm {op} exceeds {LIPSCHITZ_OP_NORM_GATE}"),
        ));
    }
    let (_, s1) = amp_run(matrix, y1, beta, k)?;
    let (_, s2) = amp_run(matrix, y2, beta, k)?;
    let diff: Vec<f64> = s1.z.iter().zip(&s2.z).map(|(a, b)| a - b).collect();
    Ok(norm(&diff) / gap)
}
