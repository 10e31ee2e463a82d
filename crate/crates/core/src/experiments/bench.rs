use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::disorder::sample_goe;
use crate::error::{Error, Result};
use crate::sampler::{localize, RunConfig, RunPlan};

use super::record::{Curve, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n: usize,
    /// Fastest wall-clock time of one `localize` call.
    pub seconds: f64,
    pub matvecs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of log time against log n; absent for fewer than
    /// two sizes.
    pub slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Time `localize` at each size in `n_grid` (ascending), best of `repeats`.
pub fn bench(n_grid: &[usize], config: &RunConfig, repeats: usize) -> Result<(BenchResult, RunRecord)> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_grid", "must be non-empty and strictly ascending"));
    }
    let repeats = repeats.max(1);
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let cfg = RunConfig { n, ..config.clone() };
        let plan = RunPlan::new(cfg)?;
        let a = sample_goe(n, config.seed)?;
        let mut best = f64::INFINITY;
        let mut matvecs = 0;
        for _ in 0..repeats {
            let start = Instant::now();
            let traj = localize(&a, &plan)?;
            best = best.min(start.elapsed().as_secs_f64());
            matvecs = traj.matvecs;
        }
        points.push(BenchPoint {
            n,
            seconds: best,
            matvecs,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds).collect();
    let slope = fit_loglog_slope(&xs, &ys);

    let mut record = RunRecord::new("bench", json!({ "n_grid": n_grid, "run": config, "repeats": repeats }));
    record.seeds = vec![config.seed];
    record.out_of_theory = config.out_of_theory();
    let mut time = Curve::default();
    for p in &points {
        time.push(p.n as f64, p.seconds, 0.0);
        record.metric(format!("n={}.matvecs", p.n), p.matvecs as f64);
    }
    record.curves.insert("seconds".into(), time);
    if let Some(s) = slope {
        record.metric("slope", s);
    }
    Ok((BenchResult { points, slope }, record.finish()))
}
