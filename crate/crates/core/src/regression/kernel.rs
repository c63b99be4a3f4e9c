//! Kernel functions over sample columns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Kernel family as configured; `gamma` of `None` means `1 / dim`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    #[default]
    Poly2,
    Rbf,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Poly2 => "poly2",
            KernelKind::Rbf => "rbf",
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Kernel {
        match self {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Poly2 => Kernel::Poly2 { gamma },
            KernelKind::Rbf => Kernel::Rbf { gamma },
        }
    }

    /// Default `gamma = 1 / dim`.
    pub fn for_dim(self, dim: usize) -> Kernel {
        self.with_gamma(1.0 / dim.max(1) as f64)
    }
}

/// A concrete kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `x·y`
    Linear,
    /// `(γ x·y + 1)²`
    Poly2 { gamma: f64 },
    /// `exp(-γ |x - y|²)`
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn kind(&self) -> KernelKind {
        match self {
            Kernel::Linear => KernelKind::Linear,
            Kernel::Poly2 { .. } => KernelKind::Poly2,
            Kernel::Rbf { .. } => KernelKind::Rbf,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            Kernel::Linear => 0.0,
            Kernel::Poly2 { gamma } | Kernel::Rbf { gamma } => gamma,
        }
    }

    /// Kernel value from a dot product and the two squared norms.
    #[inline]
    pub fn from_dot(&self, dot: f64, aa: f64, bb: f64) -> f64 {
        match *self {
            Kernel::Linear => dot,
            Kernel::Poly2 { gamma } => {
                let t = gamma * dot + 1.0;
                t * t
            }
            Kernel::Rbf { gamma } => (-gamma * (aa + bb - 2.0 * dot).max(0.0)).exp(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let (aa, bb) = match self {
            Kernel::Rbf { .. } => (a.iter().map(|x| x * x).sum(), b.iter().map(|x| x * x).sum()),
            _ => (0.0, 0.0),
        };
        self.from_dot(dot, aa, bb)
    }

    /// Gram matrix of the columns of `x`.
    pub fn gram(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut k = x.tr_mul(x);
        let norms: Vec<f64> = (0..k.nrows()).map(|i| k[(i, i)]).collect();
        self.finish(&mut k, &norms, &norms);
        k
    }

    /// `K[i, j] = k(x_i, z_j)` for columns of `x` and `z`.
    pub fn cross(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut k = x.tr_mul(z);
        let nx: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
        let nz: Vec<f64> = z.column_iter().map(|c| c.norm_squared()).collect();
        self.finish(&mut k, &nx, &nz);
        k
    }

    /// Kernel values of one sample against every column of `x`.
    pub fn row(&self, x: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(v);
        let mut out = x.tr_mul(&v);
        if let Kernel::Linear = self {
            return out;
        }
        let vv = v.norm_squared();
        for (i, o) in out.iter_mut().enumerate() {
            let aa = match self {
                Kernel::Rbf { .. } => x.column(i).norm_squared(),
                _ => 0.0,
            };
            *o = self.from_dot(*o, aa, vv);
        }
        out
    }

    fn finish(&self, k: &mut DMatrix<f64>, nx: &[f64], nz: &[f64]) {
        if let Kernel::Linear = self {
            return;
        }
        for j in 0..k.ncols() {
            for i in 0..k.nrows() {
                k[(i, j)] = self.from_dot(k[(i, j)], nx[i], nz[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_pointwise() {
        let x = DMatrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f64).sin());
        for k in [Kernel::Linear, Kernel::Poly2 { gamma: 0.3 }, Kernel::Rbf { gamma: 0.2 }] {
            let g = k.gram(&x);
            let r = k.row(&x, x.column(3).as_slice());
            for i in 0..7 {
                for j in 0..7 {
                    let e = k.eval(x.column(i).as_slice(), x.column(j).as_slice());
                    assert!((g[(i, j)] - e).abs() < 1e-12);
                }
                let e = k.eval(x.column(i).as_slice(), x.column(3).as_slice());
                assert!((r[i] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poly2_value() {
        let k = Kernel::Poly2 { gamma: 0.5 };
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, 1.0]), (0.5 * 5.0 + 1.0f64).powi(2));
    }
}
