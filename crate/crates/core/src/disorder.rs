//! GOE coupling matrices, interpolated disorder and planted (spiked) instances.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec, norm};
use crate::rng::{derive_seed, rng_from_seed, Purpose};

/// Iteration cap for the power method.
pub const POWER_ITER_CAP: usize = 1000;
/// Default relative tolerance for the power method.
pub const POWER_ITER_TOL: f64 = 1e-6;

const MAGIC: &[u8; 4] = b"SKLM";
const FORMAT_VERSION: u32 = 1;

/// Symmetric dense `n x n` disorder matrix.
#[derive(Debug)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
    seed: u64,
    op_norm: OnceLock<f64>,
}

impl Clone for CouplingMatrix {
    fn clone(&self) -> Self {
        let op_norm = OnceLock::new();
        if let Some(v) = self.op_norm.get() {
            let _ = op_norm.set(*v);
        }
        Self {
            n: self.n,
            entries: self.entries.clone(),
            seed: self.seed,
            op_norm,
        }
    }
}

impl PartialEq for CouplingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

impl CouplingMatrix {
    /// Wrap explicit entries. The matrix must be square and exactly symmetric.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be at least 1"));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::invalid(
                        "entries",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(Self::from_raw(n, entries, 0))
    }

    fn from_raw(n: usize, entries: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            entries,
            seed,
            op_norm: OnceLock::new(),
        }
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_entries(n, vec![0.0; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// `out = A v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        matvec(&self.entries, self.n, v, out);
    }

    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply(v, &mut out);
        out
    }

    /// `<x, A x>`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply_vec(x))
    }

    /// Largest |entries[i][j] - entries[j][i]|.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.entries[i * n + j] - self.entries[j * n + i]).abs());
            }
        }
        worst
    }

    /// Cached power-iteration estimate of the operator norm. On a stalled run
    /// the best estimate seen is kept.
    pub fn op_norm_estimate(&self) -> f64 {
        *self
            .op_norm
            .get_or_init(|| match operator_norm(self, POWER_ITER_TOL) {
                Ok(v) => v,
                Err(Error::PowerIterationStalled { best_estimate, .. }) => best_estimate,
                Err(_) => unreachable!("operator_norm only stalls"),
            })
    }

    /// Scaled sum `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &CouplingMatrix, b: f64) -> Result<CouplingMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_raw(self.n, entries, self.seed))
    }

    /// Write the binary container: `SKLM`, version (u32), n (u64), then the
    /// row-major payload as little-endian `f64`.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n as u64).to_le_bytes()).map_err(io)?;
        for x in &self.entries {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(io)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(io)?;
        let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("dimension overflow"))?;
        if n == 0 {
            return Err(bad("zero dimension"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut b8).map_err(io)?;
            entries.push(f64::from_le_bytes(b8));
        }
        if r.read(&mut b8).map_err(io)? != 0 {
            return Err(bad("trailing bytes after payload"));
        }
        Self::from_entries(n, entries).map_err(|e| bad(&e.to_string()))
    }

    /// Plain CSV export, one row per line, for inspection.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for i in 0..self.n {
            let line: Vec<String> = self.row(i).iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Draw `A ~ GOE(n)`: off-diagonal `N(0, 1/n)`, diagonal `N(0, 2/n)`, upper
/// triangle drawn row by row and mirrored.
pub fn sample_goe(n: usize, seed: u64) -> Result<CouplingMatrix> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be at least 1"));
    }
    let mut rng = rng_from_seed(seed, Purpose::Disorder);
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        entries[i * n + i] = diag * g;
        for j in (i + 1)..n {
            let g: f64 = rng.sample(StandardNormal);
            let v = off * g;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(CouplingMatrix::from_raw(n, entries, seed))
}

/// Power-iteration estimate of `||A||_op`.
///
/// Iterates `v <- A v / ||A v||` from the normalized all-ones vector and tracks
/// `||A v||`, which increases monotonically towards the largest eigenvalue
/// magnitude even when `λ_max ≈ -λ_min`.
pub fn operator_norm(matrix: &CouplingMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let n = matrix.n();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut best = 0.0f64;
    let mut prev = f64::NAN;
    for _ in 0..POWER_ITER_CAP {
        matrix.apply(&v, &mut w);
        let est = norm(&w);
        if est == 0.0 {
            // v in the kernel: restart from a coordinate vector unless A == 0.
            if matrix.entries().iter().all(|&x| x == 0.0) {
                return Ok(0.0);
            }
            let k = (0..n)
                .find(|&i| matrix.row(i).iter().any(|&x| x != 0.0))
                .unwrap_or(0);
            v.iter_mut().for_each(|x| *x = 0.0);
            v[k] = 1.0;
            continue;
        }
        best = best.max(est);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / est;
        }
        if (est - prev).abs() <= tol * est {
            return Ok(best);
        }
        prev = est;
    }
    Err(Error::PowerIterationStalled {
        iterations: POWER_ITER_CAP,
        best_estimate: best,
    })
}

/// Two independent GOE draws and the path `A_s = sqrt(1 - s^2) A_0 + s A_1`.
#[derive(Clone, Debug)]
pub struct DisorderPath {
    a0: CouplingMatrix,
    a1: CouplingMatrix,
}

impl DisorderPath {
    pub fn new(a0: CouplingMatrix, a1: CouplingMatrix) -> Result<Self> {
        if a0.n() != a1.n() {
            return Err(Error::DimensionMismatch {
                expected: a0.n(),
                got: a1.n(),
            });
        }
        Ok(Self { a0, a1 })
    }

    /// Draw both endpoints from one seed.
    pub fn sample(n: usize, seed: u64) -> Result<Self> {
        let a0 = sample_goe(n, derive_seed(seed, Purpose::Disorder, 0, 0))?;
        let a1 = sample_goe(n, derive_seed(seed, Purpose::Disorder, 1, 0))?;
        Self::new(a0, a1)
    }

    pub fn a0(&self) -> &CouplingMatrix {
        &self.a0
    }

    pub fn a1(&self) -> &CouplingMatrix {
        &self.a1
    }

    pub fn n(&self) -> usize {
        self.a0.n()
    }
}

/// `A_s` on the interpolation path; the endpoints are returned exactly.
pub fn interpolate(path: &DisorderPath, s: f64) -> Result<CouplingMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("s", format!("must lie in [0, 1], got {s}")));
    }
    if s == 0.0 {
        return Ok(path.a0.clone());
    }
    if s == 1.0 {
        return Ok(path.a1.clone());
    }
    path.a0.combine((1.0 - s * s).sqrt(), &path.a1, s)
}

/// Rank-one spiked GOE instance `A = (β/n) x0 x0ᵀ + W`.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub x0: Vec<f64>,
    pub matrix: CouplingMatrix,
    pub beta: f64,
}

/// Draw a planted instance. The noise `W` is exactly `sample_goe(n, seed)`; the
/// signal comes from a separate stream of the same seed.
pub fn sample_planted(n: usize, beta: f64, seed: u64) -> Result<PlantedInstance> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    let noise = sample_goe(n, seed)?;
    let mut rng = rng_from_seed(seed, Purpose::Spike);
    let x0: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let scale = beta / n as f64;
    let mut entries = noise.entries;
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] += scale * x0[i] * x0[j];
        }
    }
    Ok(PlantedInstance {
        x0,
        matrix: CouplingMatrix::from_raw(n, entries, seed),
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(sample_goe(0, 1), Err(Error::InvalidParameter { field: "n", .. })));
    }

    #[test]
    fn one_by_one_is_a_single_gaussian() {
        let a = sample_goe(1, 11).unwrap();
        assert_eq!(a.n(), 1);
        // variance 2: over many seeds the sample variance should be close to 2.
        let xs: Vec<f64> = (0..4000).map(|s| sample_goe(1, s).unwrap().get(0, 0)).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - 2.0).abs() < 0.15, "var = {var}");
    }

    #[test]
    fn generation_is_deterministic_and_symmetric() {
        let a = sample_goe(37, 5).unwrap();
        let b = sample_goe(37, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.asymmetry(), 0.0);
        assert_ne!(a, sample_goe(37, 6).unwrap());
    }

    #[test]
    fn operator_norm_known_spectra() {
        let z = CouplingMatrix::zeros(4).unwrap();
        assert_eq!(operator_norm(&z, 1e-6).unwrap(), 0.0);
        let d = CouplingMatrix::from_entries(
            3,
            vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0],
        )
        .unwrap();
        let est = operator_norm(&d, 1e-9).unwrap();
        assert!((est - 3.0).abs() <= 3.0 * 1e-6, "est = {est}");
        // Spectrum {2, -2}: no dominant sign, still converges to 2.
        let s = CouplingMatrix::from_entries(2, vec![0.0, 2.0, 2.0, 0.0]).unwrap();
        assert!((operator_norm(&s, 1e-9).unwrap() - 2.0).abs() < 1e-9);
        assert!(operator_norm(&s, 0.0).is_err());
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let path = DisorderPath::sample(20, 3).unwrap();
        assert_eq!(&interpolate(&path, 0.0).unwrap(), path.a0());
        assert_eq!(&interpolate(&path, 1.0).unwrap(), path.a1());
        assert!(interpolate(&path, -0.1).is_err());
        assert!(interpolate(&path, 1.5).is_err());
        assert_eq!(interpolate(&path, 0.3).unwrap().asymmetry(), 0.0);

        let mut id = vec![0.0; 9];
        id[0] = 1.0;
        id[4] = 1.0;
        id[8] = 1.0;
        let p = DisorderPath::new(
            CouplingMatrix::from_entries(3, id.clone()).unwrap(),
            CouplingMatrix::zeros(3).unwrap(),
        )
        .unwrap();
        let m = interpolate(&p, 0.6).unwrap();
        for (x, y) in m.entries().iter().zip(&id) {
            assert!((x - 0.8 * y).abs() < 1e-15);
        }
    }

    #[test]
    fn planted_with_zero_spike_is_goe() {
        let p = sample_planted(30, 0.0, 9).unwrap();
        assert_eq!(p.matrix, sample_goe(30, 9).unwrap());
        assert!(p.x0.iter().all(|&x| x == 1.0 || x == -1.0));
        assert!(sample_planted(3, -1.0, 0).is_err());
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.sklm");
        let a = sample_goe(17, 4).unwrap();
        a.write_binary(&path).unwrap();
        let b = CouplingMatrix::read_binary(&path).unwrap();
        assert!(a
            .entries()
            .iter()
            .zip(b.entries())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SKLM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 17);
        assert_eq!(bytes.len(), 16 + 17 * 17 * 8);

        std::fs::write(&path, b"XXXX").unwrap();
        assert!(matches!(CouplingMatrix::read_binary(&path), Err(Error::Format { .. })));
        let csv = dir.path().join("a.csv");
        a.write_csv(&csv).unwrap();
        assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 17);
    }
}
