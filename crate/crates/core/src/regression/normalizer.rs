//! Per-dimension standardization.

use crate::error::RegressionError;

/// Floor on the per-dimension standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Mean and population standard deviation of each dimension.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, RegressionError> {
        let mut n = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for row in rows {
            if n == 0 {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            } else if row.len() != mean.len() {
                return Err(RegressionError::Dimension {
                    expected: mean.len(),
                    got: row.len(),
                });
            }
            n += 1;
            for (i, &x) in row.iter().enumerate() {
                let d = x - mean[i];
                mean[i] += d / n as f64;
                m2[i] += d * (x - mean[i]);
            }
        }
        if n == 0 {
            return Err(RegressionError::TooFewSamples { needed: 1, got: 0 });
        }
        let std = m2.iter().map(|s| (s / n as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, RegressionError> {
        if x.len() != self.dim() {
            return Err(RegressionError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}
