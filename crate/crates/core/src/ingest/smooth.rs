//! Truncated Gaussian smoothing with boundary renormalization.

use crate::error::IngestError;

/// Smoothing widths, in frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingConfig {
    /// Applied to gyro and linear acceleration before windowing.
    pub sigma_imu: f64,
    /// Applied to ground-truth velocity targets.
    pub sigma_velocity: f64,
    /// Kernel radius in units of sigma, rounded up to whole frames.
    pub truncate: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            sigma_imu: 2.0,
            sigma_velocity: 30.0,
            truncate: 4.0,
        }
    }
}

/// Sampled, normalized Gaussian on `-radius..=radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    /// Kernel truncated at `ceil(4 sigma)` frames.
    pub fn new(sigma: f64) -> Result<Self, IngestError> {
        Self::with_truncation(sigma, 4.0)
    }

    pub fn with_truncation(sigma: f64, truncate: f64) -> Result<Self, IngestError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(IngestError::InvalidSigma(sigma));
        }
        let radius = (truncate * sigma).ceil().max(1.0) as usize;
        let mut weights: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-0.5 * (d / sigma).powi(2)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { sigma, weights })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.weights.len() / 2
    }

    /// Weights indexed by offset `-radius..=radius`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight for an offset in frames (zero outside the support).
    pub fn weight(&self, offset: isize) -> f64 {
        let r = self.radius() as isize;
        if offset.abs() > r {
            0.0
        } else {
            self.weights[(offset + r) as usize]
        }
    }

    /// Symmetric smoothing of sample `i`, renormalized over valid support.
    pub fn smooth_at<const D: usize>(&self, x: &[[f64; D]], i: usize) -> [f64; D] {
        let r = self.radius();
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(x.len() - 1);
        self.accumulate(x, lo, hi, i)
    }

    /// Trailing half-kernel smoothing of sample `i`: only `x[..=i]` is read.
    pub fn smooth_causal_at<const D: usize>(&self, x: &[[f64; D]], i: usize) -> [f64; D] {
        let lo = i.saturating_sub(self.radius());
        self.accumulate(x, lo, i, i)
    }

    fn accumulate<const D: usize>(&self, x: &[[f64; D]], lo: usize, hi: usize, i: usize) -> [f64; D] {
        let r = self.radius();
        let mut acc = [0.0; D];
        let mut mass = 0.0;
        for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
            let w = self.weights[j + r - i];
            mass += w;
            for d in 0..D {
                acc[d] += w * xj[d];
            }
        }
        for a in acc.iter_mut() {
            *a /= mass;
        }
        acc
    }

    pub fn smooth<const D: usize>(&self, x: &[[f64; D]]) -> Vec<[f64; D]> {
        (0..x.len()).map(|i| self.smooth_at(x, i)).collect()
    }

    pub fn smooth_causal<const D: usize>(&self, x: &[[f64; D]]) -> Vec<[f64; D]> {
        (0..x.len()).map(|i| self.smooth_causal_at(x, i)).collect()
    }
}

/// Per-channel Gaussian smoothing of a series of `D`-vectors.
///
/// Same length as the input. Near the ends the kernel is cut to the samples
/// that exist and renormalized, so constants stay constant.
pub fn gaussian_smooth<const D: usize>(
    signal: &[[f64; D]],
    sigma: f64,
) -> Result<Vec<[f64; D]>, IngestError> {
    Ok(GaussianKernel::new(sigma)?.smooth(signal))
}

/// Scalar convenience wrapper over [`gaussian_smooth`].
pub fn gaussian_smooth_scalar(signal: &[f64], sigma: f64) -> Result<Vec<f64>, IngestError> {
    let wrapped: Vec<[f64; 1]> = signal.iter().map(|&v| [v]).collect();
    Ok(gaussian_smooth(&wrapped, sigma)?
        .into_iter()
        .map(|[v]| v)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_signal_is_unchanged() {
        for sigma in [0.3, 2.0, 30.0] {
            let out = gaussian_smooth_scalar(&[4.25; 50], sigma).unwrap();
            assert!(out.iter().all(|v| (v - 4.25).abs() < 1e-12));
        }
    }

    #[test]
    fn impulse_reproduces_gaussian() {
        let mut x = vec![0.0; 41];
        x[20] = 1.0;
        let out = gaussian_smooth_scalar(&x, 2.0).unwrap();
        // radius 8, normalizer computed independently of the implementation
        let z: f64 = (-8..=8).map(|k| (-(k as f64).powi(2) / 8.0).exp()).sum();
        for (i, v) in out.iter().enumerate() {
            let k = i as f64 - 20.0;
            let expect = if k.abs() <= 8.0 { (-k * k / 8.0).exp() / z } else { 0.0 };
            assert!((v - expect).abs() < 1e-15, "i={i}");
        }
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_ramp_is_unchanged() {
        let x: Vec<f64> = (0..100).map(|i| 0.37 * i as f64 - 3.0).collect();
        let out = gaussian_smooth_scalar(&x, 2.0).unwrap();
        for i in 8..92 {
            assert!((out[i] - x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_signal_gives_empty_output() {
        assert!(gaussian_smooth_scalar(&[], 2.0).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_positive_sigma() {
        assert!(GaussianKernel::new(0.0).is_err());
        assert!(GaussianKernel::new(f64::NAN).is_err());
    }

    #[test]
    fn causal_variant_ignores_future_samples() {
        let k = GaussianKernel::new(2.0).unwrap();
        let mut x: Vec<[f64; 1]> = (0..30).map(|i| [i as f64]).collect();
        let before = k.smooth_causal_at(&x, 15);
        x[16][0] = 1e6;
        assert_eq!(before, k.smooth_causal_at(&x, 15));
        assert_eq!(k.smooth_causal(&[[2.0]; 10]), vec![[2.0]; 10]);
    }

    proptest! {
        #[test]
        fn commutes_with_affine_maps(
            x in prop::collection::vec(-10.0f64..10.0, 1..80),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            sigma in 0.5f64..10.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let sx = gaussian_smooth_scalar(&x, sigma).unwrap();
            let sy = gaussian_smooth_scalar(&y, sigma).unwrap();
            for (p, q) in sx.iter().zip(&sy) {
                prop_assert!((a * p + b - q).abs() < 1e-9);
            }
        }
    }
}
