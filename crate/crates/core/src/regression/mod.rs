//! Placement classification and velocity regression.

mod cascade;
mod grid;
mod io;
mod kernel;
mod normalizer;
mod smo;
mod svc;
mod svr;

pub use cascade::{CascadeModel, GlobalModel, RegressorReport, TrainConfig, TrainReport};
pub use grid::{fold_assignment, grid_search, grid_search_gram, GridCell, GridResult, DEFAULT_FOLDS, GRID_C, GRID_EPSILON};
pub use io::{decode, encode, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use kernel::{Kernel, KernelKind};
pub use normalizer::{Normalizer, STD_FLOOR};
pub use smo::SMO_TOLERANCE;
pub use svc::{argmax, BinarySvc, PlacementClassifier, DEFAULT_CLASSIFIER_C, MIN_PER_CLASS};
pub use svr::{train_svr, train_svr_with, Axis, Hyperparams, SvrModel, SvrWeights, MIN_SVR_SAMPLES};

use crate::error::RegressionError;
use crate::sequence::{Placement, SAMPLE_RATE_HZ};

/// Anything that maps a feature vector to a stabilized-frame velocity.
pub trait VelocityRegressor: Send + Sync {
    /// Horizontal velocity `(v_x, v_z)` in m/s and the placement used.
    fn predict(&self, feature: &[f64]) -> Result<([f64; 2], Placement), RegressionError>;

    /// Rate the model's features were built at.
    fn sample_rate(&self) -> f64 {
        SAMPLE_RATE_HZ
    }
}
