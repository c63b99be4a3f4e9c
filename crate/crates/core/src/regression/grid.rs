//! Hyperparameter grid search with k-fold cross validation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::svr::{train_kernel, Hyperparams};
use crate::error::RegressionError;

pub const GRID_C: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const GRID_EPSILON: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_FOLDS: usize = 3;

/// Mean cross-validated MSE of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub hp: Hyperparams,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Hyperparams,
    pub best_mse: f64,
    /// All 16 cells, C-major.
    pub cells: Vec<GridCell>,
}

/// Fold of each sample after a seeded shuffle.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Grid search over the columns of `x`.
pub fn grid_search(
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: Kernel,
    folds: usize,
    seed: u64,
    tol: f64,
) -> Result<GridResult, RegressionError> {
    let idx: Vec<usize> = (0..x.ncols()).collect();
    grid_search_gram(&kernel.gram(x), &idx, y, kernel, folds, seed, tol)
}

/// Grid search on the samples `idx` of a precomputed kernel matrix.
pub fn grid_search_gram(
    k: &DMatrix<f64>,
    idx: &[usize],
    y: &[f64],
    kernel: Kernel,
    folds: usize,
    seed: u64,
    tol: f64,
) -> Result<GridResult, RegressionError> {
    let n = idx.len();
    if folds < 2 || n < folds {
        return Err(RegressionError::TooFewSamples {
            needed: folds.max(2),
            got: n,
        });
    }
    if y.len() != n {
        return Err(RegressionError::Dimension { expected: n, got: y.len() });
    }
    let fold = fold_assignment(n, folds, seed);
    let mut cells = Vec::with_capacity(16);
    for c in GRID_C {
        for epsilon in GRID_EPSILON {
            let hp = Hyperparams { c, epsilon };
            let mut mse = 0.0;
            for f in 0..folds {
                let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold[i] != f);
                let rows: Vec<usize> = train.iter().map(|&i| idx[i]).collect();
                let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let m = train_kernel(k, &rows, &ty, hp, kernel, tol)?;
                let err: f64 = test
                    .iter()
                    .map(|&i| {
                        let p = m.predict_from_row(k.column(idx[i]).as_slice(), &[]);
                        (p - y[i]).powi(2)
                    })
                    .sum();
                mse += err / test.len() as f64;
            }
            cells.push(GridCell {
                hp,
                mse: mse / folds as f64,
            });
        }
    }
    // strict improvement keeps the smaller C, then the smaller epsilon
    let mut best = cells[0];
    for cell in &cells[1..] {
        if cell.mse < best.mse {
            best = *cell;
        }
    }
    Ok(GridResult {
        best: best.hp,
        best_mse: best.mse,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(10, 3, 7);
        assert_eq!(a, fold_assignment(10, 3, 7));
        let counts: Vec<usize> = (0..3).map(|f| a.iter().filter(|&&x| x == f).count()).collect();
        assert_eq!(counts, vec![4, 3, 3]);
    }

    #[test]
    fn noiseless_linear_data_picks_the_smallest_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(3, 150, |_, _| rng.random_range(-1.0..1.0));
        let w = [0.4, -0.2, 0.1];
        let y: Vec<f64> = x.column_iter().map(|c| c.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
        let r = grid_search(&x, &y, Kernel::Linear, 3, 5, 1e-3).unwrap();
        assert_eq!(r.best.epsilon, 0.001);
        assert_eq!(r.cells.len(), 16);
        assert!(r.best_mse < 1e-4);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            grid_search(&x, &[0.0, 1.0], Kernel::Linear, 3, 0, 1e-3),
            Err(RegressionError::TooFewSamples { got: 2, .. })
        ));
    }
}
