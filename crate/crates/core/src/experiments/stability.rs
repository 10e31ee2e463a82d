use serde_json::json;

use crate::disorder::{interpolate, DisorderPath};
use crate::error::{Error, Result};
use crate::sampler::{sample, EmpiricalSample, RunConfig, RunPlan};

use super::record::{bootstrap_se, mean, Curve, RunRecord};

/// Per-replica `(1/n)‖x - x'‖²` between two batches run on the same seeds.
pub fn paired_sq_distances(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<Vec<f64>> {
    if a.spins.len() != b.spins.len() || a.n != b.n {
        return Err(Error::invalid("replicas", "paired batches must have equal shape"));
    }
    let n = a.n as f64;
    Ok(a.spins
        .iter()
        .zip(&b.spins)
        .map(|(x, y)| x.iter().zip(y).filter(|(p, q)| p != q).count() as f64 * 4.0 / n)
        .collect())
}

/// Disorder and temperature stability of the sampler.
///
/// Every run reuses the replica seeds of `config`, so all outputs share their
/// Brownian increments and rounding uniforms. The disorder curve compares
/// `A_0` with `A_s` along a path drawn from `config.seed`; the temperature
/// curve compares `β` with each `β'` on `A_0`. Each trajectory is
/// single-threaded internally, so paired runs reduce in the same order.
pub fn run_stability(config: &RunConfig, s_grid: &[f64], beta_grid: &[f64], replicas: usize) -> Result<RunRecord> {
    config.validate()?;
    if s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid("s_grid", "values must lie in [0, 1]"));
    }
    let plan = RunPlan::new(config.clone())?;
    let path = DisorderPath::sample(config.n, config.seed)?;
    let base = sample(path.a0(), &plan, replicas)?;

    let mut record = RunRecord::new(
        "stability",
        json!({ "run": config, "s_grid": s_grid, "beta_grid": beta_grid, "replicas": replicas }),
    );
    record.seeds = base.seeds.clone();
    record.out_of_theory = config.out_of_theory();

    let mut disorder = Curve::default();
    for (k, &s) in s_grid.iter().enumerate() {
        let other = if s == 0.0 {
            base.clone()
        } else {
            sample(&interpolate(&path, s)?, &plan, replicas)?
        };
        let d = paired_sq_distances(&base, &other)?;
        disorder.push(s, mean(&d), bootstrap_se(&d, config.seed ^ k as u64));
    }

    let mut temperature = Curve::default();
    for (k, &b) in beta_grid.iter().enumerate() {
        let cfg = RunConfig { beta: b, ..config.clone() };
        record.out_of_theory |= cfg.out_of_theory();
        let other = if b == config.beta {
            base.clone()
        } else {
            sample(path.a0(), &RunPlan::new(cfg)?, replicas)?
        };
        let d = paired_sq_distances(&base, &other)?;
        temperature.push(b, mean(&d), bootstrap_se(&d, config.seed ^ (k as u64 + 500)));
    }

    record.metric("disorder_nondecreasing", disorder.is_nondecreasing() as u8 as f64);
    record.metric("temperature_nondecreasing", temperature.is_nondecreasing() as u8 as f64);
    for (x, y) in disorder.x.iter().zip(&disorder.y) {
        record.metric(format!("disorder.s={x}"), *y);
    }
    for (x, y) in temperature.x.iter().zip(&temperature.y) {
        record.metric(format!("temperature.beta={x}"), *y);
    }
    record.curves.insert("disorder".into(), disorder);
    record.curves.insert("temperature".into(), temperature);
    Ok(record.finish())
}
