//! ε-insensitive support vector regression.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::smo::{max_iterations, SmoProblem, SMO_TOLERANCE};
use crate::error::RegressionError;
use crate::sequence::Placement;

/// Fewest samples an SVR is trained on.
pub const MIN_SVR_SAMPLES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
}

impl Hyperparams {
    pub fn new(c: f64, epsilon: f64) -> Result<Self, RegressionError> {
        let hp = Self { c, epsilon };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(RegressionError::InvalidHyperparams(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(RegressionError::InvalidHyperparams(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Per-placement defaults.
    pub fn for_placement(p: Placement) -> Self {
        match p {
            Placement::Leg => Self { c: 1.0, epsilon: 0.001 },
            Placement::Bag => Self { c: 10.0, epsilon: 0.01 },
            Placement::Hand => Self { c: 10.0, epsilon: 0.001 },
            Placement::Body => Self { c: 1.0, epsilon: 0.001 },
        }
    }
}

/// Velocity component an SVR predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Z,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Z => 1,
        }
    }
}

/// Learned function: primal weights or kernel expansion over sample columns.
#[derive(Clone, Debug, PartialEq)]
pub enum SvrWeights {
    Primal(Vec<f64>),
    Dual { rows: Vec<usize>, coef: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub hp: Hyperparams,
    pub weights: SvrWeights,
    pub bias: f64,
}

impl SvrModel {
    /// Prediction for `x`; `support` holds the columns `Dual` rows refer to.
    pub fn predict(&self, support: &DMatrix<f64>, x: &[f64]) -> f64 {
        match &self.weights {
            SvrWeights::Primal(w) => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias,
            SvrWeights::Dual { rows, coef } => {
                rows.iter()
                    .zip(coef)
                    .map(|(&r, c)| c * self.kernel.eval(support.column(r).as_slice(), x))
                    .sum::<f64>()
                    + self.bias
            }
        }
    }

    /// Prediction from precomputed kernel values against all support columns.
    pub fn predict_from_row(&self, krow: &[f64], x: &[f64]) -> f64 {
        match &self.weights {
            SvrWeights::Primal(_) => self.predict(&DMatrix::zeros(0, 0), x),
            SvrWeights::Dual { rows, coef } => {
                rows.iter().zip(coef).map(|(&r, c)| c * krow[r]).sum::<f64>() + self.bias
            }
        }
    }

    pub fn support_count(&self) -> usize {
        match &self.weights {
            SvrWeights::Primal(_) => 0,
            SvrWeights::Dual { rows, .. } => rows.len(),
        }
    }
}

/// Trains on the columns of `x` against targets `y`.
pub fn train_svr(x: &DMatrix<f64>, y: &[f64], hp: Hyperparams, kernel: Kernel) -> Result<SvrModel, RegressionError> {
    train_svr_with(x, y, hp, kernel, SMO_TOLERANCE)
}

/// [`train_svr`] with an explicit KKT tolerance.
pub fn train_svr_with(
    x: &DMatrix<f64>,
    y: &[f64],
    hp: Hyperparams,
    kernel: Kernel,
    tol: f64,
) -> Result<SvrModel, RegressionError> {
    let idx: Vec<usize> = (0..x.ncols()).collect();
    if kernel == Kernel::Linear {
        return train_linear(x, &idx, y, hp, tol);
    }
    let k = kernel.gram(x);
    train_kernel(&k, &idx, y, hp, kernel, tol)
}

fn check(n: usize, y: &[f64], hp: &Hyperparams) -> Result<(), RegressionError> {
    hp.validate()?;
    if n < MIN_SVR_SAMPLES {
        return Err(RegressionError::TooFewSamples {
            needed: MIN_SVR_SAMPLES,
            got: n,
        });
    }
    if y.len() != n {
        return Err(RegressionError::Dimension { expected: n, got: y.len() });
    }
    Ok(())
}

/// Linear-kernel SMO on the columns `idx` of `x`, folded into primal weights.
pub(crate) fn train_linear(
    x: &DMatrix<f64>,
    idx: &[usize],
    y: &[f64],
    hp: Hyperparams,
    tol: f64,
) -> Result<SvrModel, RegressionError> {
    check(idx.len(), y, &hp)?;
    let sub = x.select_columns(idx);
    let k = Kernel::Linear.gram(&sub);
    let local: Vec<usize> = (0..idx.len()).collect();
    let m = train_kernel(&k, &local, y, hp, Kernel::Linear, tol)?;
    let SvrWeights::Dual { rows, coef } = &m.weights else {
        unreachable!("kernel training returns a dual model")
    };
    let mut w = vec![0.0; x.nrows()];
    for (&r, c) in rows.iter().zip(coef) {
        for (wi, xi) in w.iter_mut().zip(sub.column(r).iter()) {
            *wi += c * xi;
        }
    }
    Ok(SvrModel {
        weights: SvrWeights::Primal(w),
        ..m
    })
}

/// SMO on the sub-kernel `k[idx, idx]`; support rows index the columns of `k`.
pub(crate) fn train_kernel(
    k: &DMatrix<f64>,
    idx: &[usize],
    y: &[f64],
    hp: Hyperparams,
    kernel: Kernel,
    tol: f64,
) -> Result<SvrModel, RegressionError> {
    check(idx.len(), y, &hp)?;
    let n = idx.len();
    let sub = DMatrix::from_fn(n, n, |i, j| k[(idx[i], idx[j])]);
    let mut sy = vec![1.0; 2 * n];
    let mut p = vec![0.0; 2 * n];
    for i in 0..n {
        sy[n + i] = -1.0;
        p[i] = hp.epsilon - y[i];
        p[n + i] = hp.epsilon + y[i];
    }
    let sol = SmoProblem {
        k: &sub,
        y: sy,
        p,
        c: vec![hp.c; 2 * n],
    }
    .solve(tol, max_iterations(2 * n))?;
    log::debug!("svr: {n} samples, {} iterations, objective {:.6e}", sol.iterations, sol.objective);
    let mut rows = Vec::new();
    let mut coef = Vec::new();
    for i in 0..n {
        let b = sol.alpha[i] - sol.alpha[n + i];
        if b != 0.0 {
            rows.push(idx[i]);
            coef.push(b);
        }
    }
    Ok(SvrModel {
        kernel,
        hp,
        weights: SvrWeights::Dual { rows, coef },
        bias: -sol.rho,
    })
}
