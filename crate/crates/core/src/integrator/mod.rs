//! Double integration, offline and streaming.

mod offline;
mod online;
mod trajectory;

pub use offline::{
    baseline_raw, correct_with_constraints, regress_constraints, run_offline, run_offline_with, OfflineConfig,
    OfflineResult,
};
pub use online::{run_online, Emitted, OnlineConfig, OnlineEstimator, OnlineResult, Throughput};
pub use trajectory::{
    double_integrate, double_integrate_with, integrate_velocities, step, IntegrationOptions, State, Trajectory,
};
