mod args;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{CommandFactory, FromArgMatches};
use serde_json::Value;
use skloc_core::disorder::{sample_goe, CouplingMatrix};
use skloc_core::experiments::{
    bench, run_chaos, run_sampling_quality, run_stability, write_record, ChaosOptions, Curve, RunRecord,
};
use skloc_core::sampler::{localize, sample, RunConfig, RunPlan};
use skloc_core::state_evolution::{build_schedule, Quadrature};
use skloc_core::verify::run_verification;
use skloc_core::Error;

use args::{Cli, Command, StepArgs};

/// Exit-code classes: validation problems (2) versus everything else (1).
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Errors from up-front validation of merged settings.
fn validation(e: Error) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn run_config(beta: f64, n: usize, s: &StepArgs) -> RunConfig {
    RunConfig {
        beta,
        n,
        delta: s.delta,
        big_l: s.big_l,
        k_amp: s.k_amp,
        k_ngd: s.k_ngd,
        eta: s.eta,
        seed: s.seed,
        quadrature_order: s.quadrature_order,
    }
}

fn echo(subcommand: &str, merged: &Value) {
    eprintln!("skloc {subcommand}: config {merged}");
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Runtime),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Write the record and one CSV per curve next to it.
fn persist(record: &RunRecord, out: &Path) -> Result<(), Failure> {
    write_record(record, out)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "record".into());
    for p in record.write_curves_csv(dir, &stem)? {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn out_or(path: &Option<PathBuf>, default: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn dispatch(cli: Cli, matches: &clap::ArgMatches) -> Result<(), Failure> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match cli.command {
        Command::Sample(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            let matrix = match &a.matrix {
                Some(p) => {
                    let m = CouplingMatrix::read_binary(p).map_err(validation)?;
                    if sub.value_source("n") == Some(clap::parser::ValueSource::CommandLine) && m.n() != s.n {
                        return Err(Failure::Validation(anyhow!(
                            "invalid n: --n {} disagrees with the matrix dimension {}",
                            s.n,
                            m.n()
                        )));
                    }
                    Some(m)
                }
                None => None,
            };
            let n = matrix.as_ref().map_or(s.n, CouplingMatrix::n);
            let cfg = run_config(s.beta, n, &s.step);
            cfg.validate().map_err(validation)?;
            if s.replicas == 0 {
                return Err(Failure::Validation(anyhow!("invalid replicas: must be at least 1")));
            }
            echo(name, &merged);
            if cfg.out_of_theory() {
                eprintln!("note: beta >= 0.5 is outside the regime covered by the guarantees");
            }
            let matrix = match matrix {
                Some(m) => m,
                None => sample_goe(n, cfg.seed)?,
            };
            let plan = RunPlan::new(cfg)?;
            let batch = sample(&matrix, &plan, s.replicas)?;
            let out = out_or(&a.io.out, "run.json");
            batch.write(&out)?;
            eprintln!("wrote {} ({} replicas)", out.display(), batch.len());
            if let Some(p) = &a.emit_trajectory {
                let traj = localize(&matrix, &plan)?;
                write_text(Some(p), &traj.to_csv(plan.config().delta))?;
                eprintln!("wrote {}", p.display());
            }
        }
        Command::SeTable(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            let quad = Quadrature::gauss_hermite(s.quadrature_order).map_err(validation)?;
            // validates beta, delta and L before any work
            let table = build_schedule(s.beta, s.delta, s.big_l, &quad).map_err(validation)?;
            echo(name, &merged);
            write_text(a.io.out.as_deref(), &table.to_json()?)?;
        }
        Command::Verify(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            if !(3..=24).contains(&s.n) {
                return Err(Failure::Validation(anyhow!("invalid n: verify needs 3 <= n <= 24")));
            }
            echo(name, &merged);
            let report = run_verification(s.n, s.seed)?;
            let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
            write_text(a.io.out.as_deref(), &text)?;
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.check_name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Failure::Runtime(anyhow!("failed checks: {}", failed.join(", "))));
            }
        }
        Command::Chaos(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            let opts = ChaosOptions {
                beta: s.beta,
                n: s.n,
                s_grid: s.s_grid.clone(),
                disorder_samples: s.disorder_samples,
                seed: s.seed,
                w2_batch: s.w2_batch,
            };
            if s.n == 0 || s.n > skloc_core::experiments::MAX_CHAOS_N {
                return Err(Failure::Validation(anyhow!("invalid n: chaos needs 1 <= n <= 16")));
            }
            if !s.beta.is_finite() || s.beta < 0.0 {
                return Err(Failure::Validation(anyhow!("invalid beta: must be finite and >= 0")));
            }
            if s.s_grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Failure::Validation(anyhow!("invalid s_grid: values must lie in [0, 1]")));
            }
            echo(name, &merged);
            let r = run_chaos(&opts)?;
            let mut record = RunRecord::new("chaos", merged);
            record.seeds = vec![s.seed];
            record.out_of_theory = s.beta >= skloc_core::sampler::THEORY_BETA_LIMIT;
            let curve = |y: &[f64], se: &[f64]| Curve {
                x: r.s_grid.clone(),
                y: y.to_vec(),
                se: se.to_vec(),
            };
            record.curves.insert("overlap_sq".into(), curve(&r.overlap_sq, &r.overlap_se));
            if !r.w2_lower.is_empty() {
                record.curves.insert("w2_lower".into(), curve(&r.w2_lower, &r.w2_se));
            }
            record.metric("endpoint_gap", r.endpoint_gap());
            record.metric("endpoint_gap_se", r.endpoint_gap_se);
            record.metric(
                "overlap_strictly_decreasing",
                record.curves["overlap_sq"].is_strictly_decreasing() as u8 as f64,
            );
            persist(&record.finish(), &out_or(&a.io.out, "chaos.json"))?;
        }
        Command::Stability(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            let cfg = run_config(s.beta, s.n, &s.step);
            cfg.validate().map_err(validation)?;
            for &b in &s.beta_grid {
                RunConfig { beta: b, ..cfg.clone() }.validate().map_err(validation)?;
            }
            if s.replicas == 0 {
                return Err(Failure::Validation(anyhow!("invalid replicas: must be at least 1")));
            }
            echo(name, &merged);
            // coupled runs execute on a single worker
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(runtime)?;
            let mut record = pool.install(|| run_stability(&cfg, &s.s_grid, &s.beta_grid, s.replicas))?;
            record.config = merged;
            persist(&record, &out_or(&a.io.out, "stability.json"))?;
        }
        Command::Quality(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            for &b in &s.beta_grid {
                run_config(b, s.n, &s.step).validate().map_err(validation)?;
            }
            if s.n == 0 || s.n > skloc_core::experiments::MAX_QUALITY_N {
                return Err(Failure::Validation(anyhow!("invalid n: quality needs 1 <= n <= 14")));
            }
            echo(name, &merged);
            let base = run_config(0.0, s.n, &s.step);
            let mut record = run_sampling_quality(&s.beta_grid, s.n, s.replicas, &base, s.step.seed)?;
            record.config = merged;
            persist(&record, &out_or(&a.io.out, "quality.json"))?;
        }
        Command::Bench(a) => {
            let (s, merged) = config::merge(&a, sub, a.io.config.as_deref())?;
            let first = *s.n_grid.first().ok_or_else(|| Failure::Validation(anyhow!("invalid n_grid: empty")))?;
            let cfg = run_config(s.beta, first, &s.step);
            cfg.validate().map_err(validation)?;
            if s.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Failure::Validation(anyhow!("invalid n_grid: must be strictly ascending")));
            }
            echo(name, &merged);
            let (result, mut record) = bench(&s.n_grid, &cfg, s.repeats)?;
            for p in &result.points {
                eprintln!("n={} seconds={:.4} matvecs={}", p.n, p.seconds, p.matvecs);
            }
            match result.slope {
                Some(sl) => eprintln!("log-log slope {sl:.3}"),
                None => eprintln!("log-log slope: absent (single size)"),
            }
            record.config = merged;
            persist(&record, &out_or(&a.io.out, "bench.json"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

