use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// An `(x, y)` series with per-point standard errors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub se: Vec<f64>,
}

impl Curve {
    pub fn push(&mut self, x: f64, y: f64, se: f64) {
        self.x.push(x);
        self.y.push(y);
        self.se.push(se);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,se\n");
        for ((x, y), e) in self.x.iter().zip(&self.y).zip(&self.se) {
            s.push_str(&format!("{x},{y},{e}\n"));
        }
        s
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Persistent outcome of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub curves: BTreeMap<String, Curve>,
    pub seeds: Vec<u64>,
    pub timestamps: Timestamps,
    pub code_version: String,
    pub out_of_theory: bool,
}

impl RunRecord {
    pub fn new(kind: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            schema_version: RECORD_SCHEMA_VERSION,
            kind: kind.into(),
            config,
            metrics: BTreeMap::new(),
            curves: BTreeMap::new(),
            seeds: Vec::new(),
            timestamps: Timestamps {
                started_unix_ms: now_ms(),
                finished_unix_ms: 0,
            },
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            out_of_theory: false,
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn finish(mut self) -> Self {
        self.timestamps.finished_unix_ms = now_ms();
        self
    }

    /// First non-finite value, named by its key.
    pub fn first_non_finite(&self) -> Option<String> {
        if let Some((k, _)) = self.metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Some(k.clone());
        }
        for (name, c) in &self.curves {
            for (field, vals) in [("x", &c.x), ("y", &c.y), ("se", &c.se)] {
                if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                    return Some(format!("curves.{name}.{field}[{i}]"));
                }
            }
        }
        None
    }

    /// One CSV file per curve, named `<stem>.<curve>.csv`.
    pub fn write_curves_csv(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        let mut out = Vec::new();
        for (name, c) in &self.curves {
            let p = dir.join(format!("{stem}.{name}.csv"));
            fs::write(&p, c.to_csv()).map_err(|e| Error::io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Write as JSON; non-finite values are refused with their key.
pub fn write_record(record: &RunRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(key) = record.first_non_finite() {
        return Err(Error::NonFinite { key });
    }
    let text = serde_json::to_string_pretty(record)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_record(path: impl AsRef<Path>) -> Result<RunRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: "missing schema_version".into(),
        })?;
    if found != RECORD_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            found: found as u32,
            expected: RECORD_SCHEMA_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Nonparametric bootstrap standard error of `stat` over `values`.
pub fn bootstrap_se_with<T: Clone>(
    values: &[T],
    stat: impl Fn(&[T]) -> f64,
    resamples: usize,
    seed: u64,
) -> f64 {
    let m = values.len();
    if m < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = Streams::new(seed).rng(Purpose::Bootstrap, m as u64, 0);
    let mut buf = Vec::with_capacity(m);
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            buf.clear();
            buf.extend((0..m).map(|_| values[rng.random_range(0..m)].clone()));
            stat(&buf)
        })
        .collect();
    let mu = mean(&stats);
    (stats.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / (resamples as f64 - 1.0)).sqrt()
}

/// Bootstrap standard error of the mean.
pub fn bootstrap_se(values: &[f64], seed: u64) -> f64 {
    bootstrap_se_with(values, mean, BOOTSTRAP_RESAMPLES, seed)
}
