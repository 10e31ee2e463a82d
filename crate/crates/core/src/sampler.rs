//! Euler-discretized stochastic localization with the AMP + NGD mean oracle,
//! randomized rounding, and disorder-coupled runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{amp_run, DEFAULT_K_AMP};
use crate::disorder::{interpolate, CouplingMatrix, DisorderPath};
use crate::error::{check_dim, Error, Result};
use crate::magnetization::MagnetizationVector;
use crate::rng::{derive_seed, Purpose, Streams};
use crate::state_evolution::{build_schedule, Quadrature, ScheduleTable, DEFAULT_QUADRATURE_ORDER};
use crate::tap::{ngd_run, TapContext, DEFAULT_ETA, DEFAULT_K_NGD};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_BIG_L: usize = 100;
/// Above this inverse temperature runs are allowed but outside the regime the
/// guarantees cover.
pub const THEORY_BETA_LIMIT: f64 = 0.5;

const SAMPLE_SCHEMA_VERSION: u32 = 1;

/// Parameters of one sampling run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub beta: f64,
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "L")]
    pub big_l: usize,
    pub k_amp: usize,
    pub k_ngd: usize,
    pub eta: f64,
    pub seed: u64,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
}

fn default_quadrature_order() -> usize {
    DEFAULT_QUADRATURE_ORDER
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            beta: 0.3,
            n: 100,
            delta: DEFAULT_DELTA,
            big_l: DEFAULT_BIG_L,
            k_amp: DEFAULT_K_AMP,
            k_ngd: DEFAULT_K_NGD,
            eta: DEFAULT_ETA,
            seed: 0,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::invalid("beta", format!("must be finite and >= 0, got {}", self.beta)));
        }
        if self.beta >= 1.0 {
            return Err(Error::invalid(
                "beta",
                format!("state-evolution schedule needs beta < 1, got {}", self.beta),
            ));
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if self.quadrature_order == 0 {
            return Err(Error::invalid("quadrature_order", "must be at least 1"));
        }
        Ok(())
    }

    /// `T = L δ`.
    pub fn horizon(&self) -> f64 {
        self.big_l as f64 * self.delta
    }

    pub fn out_of_theory(&self) -> bool {
        self.beta >= THEORY_BETA_LIMIT
    }
}

/// A validated config bundled with its state-evolution schedule.
#[derive(Clone, Debug)]
pub struct RunPlan {
    config: RunConfig,
    schedule: Arc<ScheduleTable>,
}

impl RunPlan {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let quad = Quadrature::gauss_hermite(config.quadrature_order)?;
        let schedule = build_schedule(config.beta, config.delta, config.big_l.max(1), &quad)?;
        Ok(Self {
            config,
            schedule: Arc::new(schedule),
        })
    }

    pub fn with_schedule(config: RunConfig, schedule: Arc<ScheduleTable>) -> Result<Self> {
        config.validate()?;
        if schedule.delta != config.delta {
            return Err(Error::invalid("schedule", "delta differs from the run config"));
        }
        if schedule.beta != config.beta {
            return Err(Error::invalid("schedule", "beta differs from the run config"));
        }
        if schedule.big_l < config.big_l || schedule.entries.len() != schedule.big_l + 1 {
            return Err(Error::invalid("schedule", "does not cover every step"));
        }
        Ok(Self { config, schedule })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn schedule(&self) -> &ScheduleTable {
        &self.schedule
    }

    pub fn shared_schedule(&self) -> Arc<ScheduleTable> {
        Arc::clone(&self.schedule)
    }

    /// Same schedule, different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut config = self.config.clone();
        config.seed = seed;
        Self {
            config,
            schedule: Arc::clone(&self.schedule),
        }
    }

    /// Seed of replica `r`.
    pub fn replica_seed(&self, r: usize) -> u64 {
        derive_seed(self.config.seed, Purpose::Replica, r as u64, 0)
    }
}

/// Mean estimator: `K_AMP` AMP iterations, then `K_NGD` natural-gradient steps
/// on the TAP free energy at overlap `q`, started from `z^{K_AMP}`.
pub fn mean_estimate(
    matrix: &CouplingMatrix,
    y: &[f64],
    beta: f64,
    q: f64,
    k_amp: usize,
    k_ngd: usize,
    eta: f64,
) -> Result<MagnetizationVector> {
    let (m_amp, state) = amp_run(matrix, y, beta, k_amp)?;
    if k_ngd == 0 {
        return Ok(m_amp);
    }
    let ctx = TapContext::new(matrix, y, q, beta)?;
    ngd_run(&ctx, &state.z, eta, k_ngd)
}

/// Stored path of one localization run.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationTrajectory {
    /// `ŷ_0, ..., ŷ_L`.
    pub y_path: Vec<Vec<f64>>,
    /// `m̂(A, ŷ_ℓ)` for `ℓ = 0..=L`; the last entry is the output mean.
    pub m_path: Vec<MagnetizationVector>,
    /// Standard Gaussian increments `w_1, ..., w_L`.
    pub increments: Vec<Vec<f64>>,
    /// Matrix-vector products performed.
    pub matvecs: u64,
}

impl LocalizationTrajectory {
    pub fn final_mean(&self) -> &MagnetizationVector {
        self.m_path.last().expect("m_path always holds the ℓ = 0 entry")
    }

    /// `step,t,y_norm_sq_over_n,m_norm_sq_over_n`.
    pub fn to_csv(&self, delta: f64) -> String {
        let mut s = String::from("step,t,y_norm_sq_over_n,m_norm_sq_over_n\n");
        for (l, (y, m)) in self.y_path.iter().zip(&self.m_path).enumerate() {
            let n = y.len() as f64;
            let yy = y.iter().map(|v| v * v).sum::<f64>() / n;
            s.push_str(&format!("{l},{:.17e},{yy:.17e},{:.17e}\n", l as f64 * delta, m.self_overlap()));
        }
        s
    }
}

/// Observer hooks for a localization run.
trait StepSink {
    fn visit(&mut self, step: usize, y: &[f64], w: Option<&[f64]>, m: &MagnetizationVector);
}

struct FullRecord(LocalizationTrajectory);

impl StepSink for FullRecord {
    fn visit(&mut self, _step: usize, y: &[f64], w: Option<&[f64]>, m: &MagnetizationVector) {
        self.0.y_path.push(y.to_vec());
        self.0.m_path.push(m.clone());
        if let Some(w) = w {
            self.0.increments.push(w.to_vec());
        }
    }
}

/// Keeps the means at chosen steps.
struct AtSteps<'a> {
    steps: &'a [usize],
    means: Vec<Option<MagnetizationVector>>,
}

impl StepSink for AtSteps<'_> {
    fn visit(&mut self, step: usize, _y: &[f64], _w: Option<&[f64]>, m: &MagnetizationVector) {
        for (slot, &s) in self.means.iter_mut().zip(self.steps) {
            if s == step {
                *slot = Some(m.clone());
            }
        }
    }
}

fn drive(
    matrix: &CouplingMatrix,
    plan: &RunPlan,
    streams: Streams,
    big_l: usize,
    sink: &mut dyn StepSink,
) -> Result<u64> {
    let cfg = &plan.config;
    let n = matrix.n();
    check_dim(cfg.n, n)?;
    let sqrt_delta = cfg.delta.sqrt();
    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    let per_call = (cfg.k_amp + cfg.k_ngd + 1) as u64;
    let mut matvecs = 0u64;
    let mean_at = |y: &[f64], step: usize| {
        mean_estimate(
            matrix,
            y,
            cfg.beta,
            plan.schedule.q_star(step),
            cfg.k_amp,
            cfg.k_ngd,
            cfg.eta,
        )
        .map_err(|e| Error::LocalizationStep {
            step,
            source: Box::new(e),
        })
    };
    for l in 0..big_l {
        let m = mean_at(&y, l)?;
        matvecs += per_call;
        if l > 0 {
            sink.visit(l, &y, Some(&w), &m);
        } else {
            sink.visit(0, &y, None, &m);
        }
        let mut rng = streams.rng(Purpose::Brownian, l as u64, 0);
        for (wi, (yi, &mi)) in w.iter_mut().zip(y.iter_mut().zip(m.values())) {
            *wi = rng.sample(StandardNormal);
            *yi = *yi + mi * cfg.delta + sqrt_delta * *wi;
        }
    }
    let m = mean_at(&y, big_l)?;
    matvecs += per_call;
    sink.visit(big_l, &y, if big_l > 0 { Some(&w) } else { None }, &m);
    Ok(matvecs)
}

fn replica_streams(plan: &RunPlan, r: usize) -> Streams {
    Streams::new(plan.replica_seed(r))
}

/// Run the localization for replica 0 of `plan` and keep the whole path.
pub fn localize(matrix: &CouplingMatrix, plan: &RunPlan) -> Result<LocalizationTrajectory> {
    localize_replica(matrix, plan, 0)
}

pub fn localize_replica(matrix: &CouplingMatrix, plan: &RunPlan, replica: usize) -> Result<LocalizationTrajectory> {
    let big_l = plan.config.big_l;
    let mut rec = FullRecord(LocalizationTrajectory {
        y_path: Vec::with_capacity(big_l + 1),
        m_path: Vec::with_capacity(big_l + 1),
        increments: Vec::with_capacity(big_l),
        matvecs: 0,
    });
    let matvecs = drive(matrix, plan, replica_streams(plan, replica), big_l, &mut rec)?;
    rec.0.matvecs = matvecs;
    Ok(rec.0)
}

/// Spin vector with `x_i = +1` iff `u_i ≤ (1 + m_i)/2`, `u_i` uniform from `rng`.
pub fn round_with(m: &MagnetizationVector, rng: &mut ChaCha8Rng) -> Vec<i8> {
    m.values()
        .iter()
        .map(|&mi| {
            let u: f64 = rng.random();
            if u <= 0.5 * (1.0 + mi) {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Independent rounding of every coordinate of `m`, driven by a dedicated
/// uniform stream of `seed`.
pub fn randomized_round(m: &MagnetizationVector, seed: u64) -> Vec<i8> {
    let mut rng = Streams::new(seed).rng(Purpose::Rounding, 0, 0);
    round_with(m, &mut rng)
}

/// Batch of ±1 configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub n: usize,
    #[serde(skip)]
    pub spins: Vec<Vec<i8>>,
    pub seeds: Vec<u64>,
    pub config: Option<RunConfig>,
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    schema_version: u32,
    n: usize,
    replicas: usize,
    seeds: Vec<u64>,
    config: Option<RunConfig>,
    out_of_theory: bool,
    code_version: String,
    bits_file: String,
    bytes_per_row: usize,
    mean_magnetization: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(n: usize, spins: Vec<Vec<i8>>, seeds: Vec<u64>, config: Option<RunConfig>) -> Result<Self> {
        for row in &spins {
            check_dim(n, row.len())?;
            if row.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::invalid("spins", "entries must be ±1"));
            }
        }
        Ok(Self {
            n,
            spins,
            seeds,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn coordinate_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for row in &self.spins {
            for (a, &s) in acc.iter_mut().zip(row) {
                *a += s as f64;
            }
        }
        let m = self.spins.len().max(1) as f64;
        acc.iter().map(|a| a / m).collect()
    }

    /// Bit-coded configurations, bit `i` set iff `x_i = +1`. Requires `n ≤ 64`.
    pub fn codes(&self) -> Vec<u64> {
        assert!(self.n <= 64, "bit codes need n <= 64");
        self.spins
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(0u64, |c, (i, &s)| if s > 0 { c | (1 << i) } else { c })
            })
            .collect()
    }

    fn bytes_per_row(&self) -> usize {
        self.n.div_ceil(8)
    }

    /// Row-major packed bits, each row padded to a whole byte, LSB first.
    pub fn packed_bits(&self) -> Vec<u8> {
        let bpr = self.bytes_per_row();
        let mut out = vec![0u8; bpr * self.spins.len()];
        for (r, row) in self.spins.iter().enumerate() {
            for (i, &s) in row.iter().enumerate() {
                if s > 0 {
                    out[r * bpr + i / 8] |= 1 << (i % 8);
                }
            }
        }
        out
    }

    /// Path of the binary sidecar for a metadata path.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("bits")
    }

    /// JSON metadata at `path` plus the packed spins next to it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bits = Self::sidecar_path(path);
        let meta = SampleFile {
            schema_version: SAMPLE_SCHEMA_VERSION,
            n: self.n,
            replicas: self.spins.len(),
            seeds: self.seeds.clone(),
            out_of_theory: self.config.as_ref().is_some_and(|c| c.out_of_theory()),
            config: self.config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            bits_file: bits
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            bytes_per_row: self.bytes_per_row(),
            mean_magnetization: self.coordinate_means(),
        };
        fs::write(&bits, self.packed_bits()).map_err(|e| Error::io(&bits, e))?;
        let text = serde_json::to_string_pretty(&meta)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let meta: SampleFile = serde_json::from_str(&text)?;
        if meta.schema_version != SAMPLE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: meta.schema_version,
                expected: SAMPLE_SCHEMA_VERSION,
            });
        }
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let bits_path = path.with_file_name(&meta.bits_file);
        let bits = fs::read(&bits_path).map_err(|e| Error::io(&bits_path, e))?;
        let bpr = meta.n.div_ceil(8);
        if meta.bytes_per_row != bpr || bits.len() != bpr * meta.replicas {
            return Err(bad(format!(
                "sidecar holds {} bytes, expected {}",
                bits.len(),
                bpr * meta.replicas
            )));
        }
        if meta.seeds.len() != meta.replicas {
            return Err(bad("seed count differs from replica count".into()));
        }
        let spins = bits
            .chunks_exact(bpr.max(1))
            .take(meta.replicas)
            .map(|row| {
                (0..meta.n)
                    .map(|i| if row[i / 8] >> (i % 8) & 1 == 1 { 1 } else { -1 })
                    .collect()
            })
            .collect();
        Self::new(meta.n, spins, meta.seeds, meta.config)
    }
}

/// Output of one replica evaluated at several horizons.
#[derive(Clone, Debug)]
pub struct ReplicaOutcome {
    pub seed: u64,
    /// `m̂(A, ŷ_h)` for each requested step `h`.
    pub means: Vec<MagnetizationVector>,
    /// Rounded spins for each requested step, sharing one uniform stream.
    pub spins: Vec<Vec<i8>>,
}

/// Run `replicas` independent trajectories and report means and rounded spins
/// at each step in `horizons` (each `≤ L`). Replicas run in parallel; the
/// result is ordered by replica index.
pub fn run_replicas(
    matrix: &CouplingMatrix,
    plan: &RunPlan,
    replicas: usize,
    horizons: &[usize],
) -> Result<Vec<ReplicaOutcome>> {
    if replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    let big_l = plan.config.big_l;
    if horizons.is_empty() {
        return Err(Error::invalid("horizons", "must not be empty"));
    }
    if let Some(&h) = horizons.iter().find(|&&h| h > big_l) {
        return Err(Error::invalid("horizons", format!("step {h} exceeds L = {big_l}")));
    }
    let last = *horizons.iter().max().expect("non-empty");
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let streams = replica_streams(plan, r);
            let mut sink = AtSteps {
                steps: horizons,
                means: vec![None; horizons.len()],
            };
            drive(matrix, plan, streams, last, &mut sink)?;
            let means: Vec<MagnetizationVector> = sink
                .means
                .into_iter()
                .map(|m| m.expect("every horizon is visited"))
                .collect();
            let spins = means
                .iter()
                .map(|m| {
                    let mut rng = streams.rng(Purpose::Rounding, 0, 0);
                    round_with(m, &mut rng)
                })
                .collect();
            Ok(ReplicaOutcome {
                seed: streams.root(),
                means,
                spins,
            })
        })
        .collect()
}

/// `replicas` independent draws of the sampler's output.
pub fn sample(matrix: &CouplingMatrix, plan: &RunPlan, replicas: usize) -> Result<EmpiricalSample> {
    let out = run_replicas(matrix, plan, replicas, &[plan.config.big_l])?;
    let seeds = out.iter().map(|o| o.seed).collect();
    let spins = out.into_iter().map(|mut o| o.spins.swap_remove(0)).collect();
    EmpiricalSample::new(matrix.n(), spins, seeds, Some(plan.config.clone()))
}

/// Outputs on `A_0` and `A_s` driven by the same Brownian increments and
/// rounding uniforms.
pub fn coupled_pair(
    path: &DisorderPath,
    s: f64,
    plan: &RunPlan,
    replicas: usize,
) -> Result<(EmpiricalSample, EmpiricalSample)> {
    let a_s = interpolate(path, s)?;
    Ok((sample(path.a0(), plan, replicas)?, sample(&a_s, plan, replicas)?))
}
