use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{atanh_clamped, clamp_unit, tanh_clamped, CLAMP_EPS};

/// A point of the open cube `(-1, 1)^n`, kept at least `1e-12` away from
/// the faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationVector {
    values: Vec<f64>,
    /// Number of coordinates that had to be pulled back onto the clamp boundary.
    clamped: usize,
}

impl MagnetizationVector {
    /// Strict constructor: every value must already be interior.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= 1.0 - CLAMP_EPS))
        {
            return Err(Error::BoundaryMagnetization { index, value });
        }
        Ok(Self { values, clamped: 0 })
    }

    /// Clamp arbitrary values into the interior, counting how many moved.
    pub fn clamped(values: Vec<f64>) -> Self {
        let mut moved = 0;
        let values = values
            .into_iter()
            .map(|v| {
                let c = clamp_unit(v);
                if c != v {
                    moved += 1;
                }
                c
            })
            .collect();
        Self {
            values,
            clamped: moved,
        }
    }

    /// `tanh` of pre-activations.
    pub fn from_fields(fields: &[f64]) -> Self {
        let mut moved = 0;
        let values = fields
            .iter()
            .map(|&z| {
                let t = z.tanh();
                let c = tanh_clamped(z);
                if c != t {
                    moved += 1;
                }
                c
            })
            .collect();
        Self {
            values,
            clamped: moved,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            clamped: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// `atanh` coordinatewise.
    pub fn fields(&self) -> Vec<f64> {
        self.values.iter().map(|&m| atanh_clamped(m)).collect()
    }

    /// `(1/n) ||m||²`.
    pub fn self_overlap(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|m| m * m).sum::<f64>() / self.values.len() as f64
    }
}

impl AsRef<[f64]> for MagnetizationVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_rejected_and_clamped() {
        assert!(matches!(
            MagnetizationVector::new(vec![0.0, 1.0]),
            Err(Error::BoundaryMagnetization { index: 1, .. })
        ));
        assert!(MagnetizationVector::new(vec![f64::NAN]).is_err());
        let m = MagnetizationVector::clamped(vec![0.5, 1.0, -3.0]);
        assert_eq!(m.clamped_count(), 2);
        assert!(m.values().iter().all(|v| v.abs() <= 1.0 - CLAMP_EPS));
        let f = MagnetizationVector::from_fields(&[0.0, 40.0]);
        assert_eq!(f.clamped_count(), 1);
        assert!(f.fields()[1].is_finite());
    }
}
