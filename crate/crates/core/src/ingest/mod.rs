//! Log parsing, channel synchronization and smoothing.

mod log;
pub mod smooth;
mod sync;

pub use log::{parse_csv, parse_csv_str, to_csv_string, write_csv, write_sequence_csv, Channel, RawLog};
pub use smooth::{gaussian_smooth, gaussian_smooth_scalar, GaussianKernel, SmoothingConfig};
pub use sync::{synchronize, MAX_GAP_S};

use std::path::Path;

use crate::error::IngestError;
use crate::sequence::{Sequence, SAMPLE_RATE_HZ};

/// Parses a CSV log and resamples it to 200 Hz.
pub fn load_sequence(path: impl AsRef<Path>) -> Result<Sequence, IngestError> {
    synchronize(&parse_csv(path)?, SAMPLE_RATE_HZ)
}
